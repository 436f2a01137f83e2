//! Exact computations with the meromorphic open-string vertex algebra
//! `T(h_-)` built from a noncommutative quotient of the tensor algebra of a
//! Heisenberg algebra, together with its induced left modules
//! `W = T(h_-) ⊗ M`.
//!
//! Everything is exact over the rationals. Matrix coefficients of products
//! and iterates of vertex operators come out as [`ratfun::RatFun`] values
//! whose only poles are `z_i` and `z_i - z_j`.
//!
//! Layout:
//!
//! * [`scalar`], [`ratfun`]: rationals, Laurent polynomials, rational
//!   functions and their expansions in ordered regions.
//! * [`halgebra`]: the space `h`, words of `T(h_-)` and PBW-type rewriting.
//! * [`module`]: induced modules, mode actions and the operators `d`, `D`.
//! * [`fields`]: vertex operators by direct mode enumeration (the oracle).
//! * [`wick`]: closed-form contraction expansions of products and iterates.
//! * [`checker`]: executable axiom checks and witness search.
//! * [`parse`], [`config`]: element grammar and JSON configuration.

pub mod checker;
pub mod config;
pub mod error;
pub mod fields;
pub mod halgebra;
pub mod module;
pub mod parse;
pub mod ratfun;
pub mod scalar;
pub mod wick;

pub use error::{Error, Result};
pub use scalar::Scalar;
