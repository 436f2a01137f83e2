//! Executable checks of the vertex-algebra and module axioms on finite
//! samples, the projection onto the symmetric algebra, and the search for
//! noncommutativity witnesses.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::Result;
use crate::fields::{
    iterate_series_bruteforce, lower_exponent_bound, product_series_bruteforce_with, Standard,
    VertexOperator,
};
use crate::halgebra::{enumerate_words, validate_hspace, words_up_to, FreeElem, HSpace, NegWord};
use crate::module::{
    apply_D, apply_d, apply_mode, derive_free, key_weight, render_key, DualFunctional, Key,
    ModulePresentation, WElem,
};
use crate::ratfun::{expand_in_region, ratfun_eq, substitute_vars, window, RatFun, Region};
use crate::scalar::{binom_q, coeff_prefix, int, join_signed, ratio, render, Scalar};
use crate::wick::{
    iterate_coefficients, matrix_coeff_iterate, matrix_coeff_iterate_x,
    matrix_coeff_product, product_coefficients, PairingRule,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub name: String,
    pub params: String,
    pub passed: bool,
    /// On failure, the offending coefficient or pair of rational functions.
    pub detail: String,
}

impl CheckReport {
    fn pass(name: &str, params: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            params: params.into(),
            passed: true,
            detail: detail.into(),
        }
    }

    fn fail(name: &str, params: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            params: params.into(),
            passed: false,
            detail: detail.into(),
        }
    }

    pub fn render(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("{verdict} {}", self.name);
        if !self.params.is_empty() {
            s.push_str(&format!(" [{}]", self.params));
        }
        if !self.detail.is_empty() {
            s.push_str(&format!(": {}", self.detail));
        }
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "params": self.params,
            "passed": self.passed,
            "detail": self.detail,
        })
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Inclusive exponent range for single-variable series.
pub type ExpWindow = (i64, i64);

pub fn free_to_welem(u: &FreeElem) -> WElem {
    WElem::from_terms(u.terms().map(|(w, c)| ((w.clone(), 0), c.clone())))
}

fn welem_to_free(w: &WElem) -> FreeElem {
    let mut out = FreeElem::zero();
    for ((word, _), c) in w.terms() {
        out.add_term(word.clone(), c.clone());
    }
    out
}

/// Coefficient of `x^e` in `Y(u, x) w`.
#[cfg(test)]
fn coeff(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    u: &FreeElem,
    e: i64,
    w: &WElem,
) -> Result<WElem> {
    vo.coefficient(h, m, u, -e - 1, w)
}

fn at(s: &BTreeMap<i64, WElem>, e: i64) -> WElem {
    s.get(&e).cloned().unwrap_or_default()
}

fn show(w: &WElem, m: &ModulePresentation) -> String {
    let s = w.render(m.dim());
    if s.is_empty() {
        "0".into()
    } else {
        s
    }
}

fn uw_params(u: &FreeElem, w: &WElem, m: &ModulePresentation) -> String {
    format!("u={}, w={}", u.render(), show(w, m))
}

/// `Y(1, x) w = w` and `Y(u, x) 1 = u + O(x)` on `T(h_-)`.
pub fn verify_identity_creation(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    us: &[FreeElem],
    ws: &[WElem],
    win: ExpWindow,
) -> Result<CheckReport> {
    const NAME: &str = "identity_creation";
    let vac = FreeElem::vacuum();
    for w in ws {
        let ser = vo.series(h, m, &vac, w, win.0, win.1)?;
        for e in win.0..=win.1 {
            let got = at(&ser, e);
            let want = if e == 0 { w.clone() } else { WElem::zero() };
            if got != want {
                return Ok(CheckReport::fail(
                    NAME,
                    uw_params(&vac, w, m),
                    format!("x^{e}: got {}, expected {}", show(&got, m), show(&want, m)),
                ));
            }
        }
    }
    let v = ModulePresentation::trivial(h.dim());
    let one = WElem::vacuum(0);
    for u in us {
        let ser = vo.series(h, &v, u, &one, win.0.min(-1), 0)?;
        for e in win.0.min(-1)..=0 {
            let got = at(&ser, e);
            let want = if e == 0 { free_to_welem(u) } else { WElem::zero() };
            if got != want {
                return Ok(CheckReport::fail(
                    NAME,
                    uw_params(u, &one, &v),
                    format!("x^{e}: got {}, expected {}", show(&got, &v), show(&want, &v)),
                ));
            }
        }
    }
    Ok(CheckReport::pass(
        NAME,
        format!("{} states, {} elements", ws.len(), us.len()),
        "",
    ))
}

/// Coefficients below the exponent bound vanish and no output drops below the
/// lowest weight of the module.
pub fn verify_lower_bound(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    u: &FreeElem,
    w: &WElem,
    win: ExpWindow,
) -> Result<CheckReport> {
    const NAME: &str = "lower_bound";
    let bound = lower_exponent_bound(u, w);
    let below = vo.series(h, m, u, w, bound - 3, bound - 1)?;
    for e in bound - 3..bound {
        let got = at(&below, e);
        if !got.is_zero() {
            return Ok(CheckReport::fail(
                NAME,
                uw_params(u, w, m),
                format!("x^{e} below bound {bound}: got {}", show(&got, m)),
            ));
        }
    }
    let floor = m.min_weight();
    let ser = vo.series(h, m, u, w, win.0, win.1)?;
    for e in win.0..=win.1 {
        let got = at(&ser, e);
        let low = got.terms().map(|(k, _)| k).find(|k| key_weight(m, k) < floor).cloned();
        if let Some(k) = low {
            return Ok(CheckReport::fail(
                NAME,
                uw_params(u, w, m),
                format!("x^{e}: term {} has weight below {}", render_key(&k, m.dim()), render(&floor)),
            ));
        }
    }
    Ok(CheckReport::pass(NAME, uw_params(u, w, m), ""))
}

fn grade_free(u: &FreeElem) -> FreeElem {
    let mut out = FreeElem::zero();
    for (w, c) in u.terms() {
        out.add_term(w.clone(), c * int(w.weight() as i64));
    }
    out
}

/// `[d, Y(u, x)] = Y(d u, x) + x d/dx Y(u, x)`, coefficientwise.
pub fn verify_d_bracket(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    u: &FreeElem,
    w: &WElem,
    win: ExpWindow,
) -> Result<CheckReport> {
    const NAME: &str = "d_bracket";
    let du = grade_free(u);
    let dw = apply_d(m, w);
    let (s_w, s_dw, s_du) = (
        vo.series(h, m, u, w, win.0, win.1)?,
        vo.series(h, m, u, &dw, win.0, win.1)?,
        vo.series(h, m, &du, w, win.0, win.1)?,
    );
    for e in win.0..=win.1 {
        let c = at(&s_w, e);
        let lhs = apply_d(m, &c).sub(&at(&s_dw, e));
        let rhs = at(&s_du, e).add(&c.scale(&int(e)));
        if lhs != rhs {
            return Ok(CheckReport::fail(
                NAME,
                uw_params(u, w, m),
                format!("x^{e}: [d, Y] gives {}, Y(du) + x d/dx Y gives {}", show(&lhs, m), show(&rhs, m)),
            ));
        }
    }
    Ok(CheckReport::pass(NAME, uw_params(u, w, m), ""))
}

/// `Y(D u, x) = d/dx Y(u, x)`, coefficientwise.
#[allow(non_snake_case)]
pub fn verify_D_derivative(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    u: &FreeElem,
    w: &WElem,
    win: ExpWindow,
) -> Result<CheckReport> {
    const NAME: &str = "D_derivative";
    let du = derive_free(u);
    let s_w = vo.series(h, m, u, w, win.0, win.1 + 1)?;
    let s_du = vo.series(h, m, &du, w, win.0, win.1)?;
    for e in win.0..=win.1 {
        let lhs = at(&s_w, e + 1).scale(&int(e + 1));
        let rhs = at(&s_du, e);
        if lhs != rhs {
            return Ok(CheckReport::fail(
                NAME,
                uw_params(u, w, m),
                format!("x^{e}: d/dx Y(u) gives {}, Y(Du) gives {}", show(&lhs, m), show(&rhs, m)),
            ));
        }
    }
    Ok(CheckReport::pass(NAME, uw_params(u, w, m), ""))
}

/// `[D, Y(u, x)] = d/dx Y(u, x)` coefficientwise, plus
/// `[D, a(-n)] = n a(-n-1)` and `[D, a(n)] = -n a(n-1)` on `w`.
#[allow(non_snake_case)]
pub fn verify_D_commutator(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    u: &FreeElem,
    w: &WElem,
    win: ExpWindow,
) -> Result<CheckReport> {
    const NAME: &str = "D_commutator";
    let dw = apply_D(m, w);
    let s_w = vo.series(h, m, u, w, win.0, win.1 + 1)?;
    let s_dw = vo.series(h, m, u, &dw, win.0, win.1)?;
    for e in win.0..=win.1 {
        let lhs = at(&s_w, e + 1).scale(&int(e + 1));
        let c = at(&s_w, e);
        let rhs = apply_D(m, &c).sub(&at(&s_dw, e));
        if lhs != rhs {
            return Ok(CheckReport::fail(
                NAME,
                uw_params(u, w, m),
                format!("x^{e}: d/dx Y(u) gives {}, [D, Y(u)] gives {}", show(&lhs, m), show(&rhs, m)),
            ));
        }
    }
    for i in 0..h.dim() {
        for n in 1..=2i64 {
            for sign in [-1i64, 1] {
                let k = sign * n;
                let lhs = apply_D(m, &apply_mode(h, m, i, k, w)?).sub(&apply_mode(h, m, i, k, &dw)?);
                let rhs = apply_mode(h, m, i, k - 1, w)?.scale(&int(-k));
                if lhs != rhs {
                    return Ok(CheckReport::fail(
                        NAME,
                        uw_params(u, w, m),
                        format!(
                            "[D, a{}({k})] w = {}, expected {}",
                            i + 1,
                            show(&lhs, m),
                            show(&rhs, m)
                        ),
                    ));
                }
            }
        }
    }
    Ok(CheckReport::pass(NAME, uw_params(u, w, m), ""))
}

/// Derivative property and `D`-commutator together.
#[allow(non_snake_case)]
pub fn verify_D_properties(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    u: &FreeElem,
    w: &WElem,
    win: ExpWindow,
) -> Result<CheckReport> {
    const NAME: &str = "D_properties";
    for r in [
        verify_D_derivative(vo, h, m, u, w, win)?,
        verify_D_commutator(vo, h, m, u, w, win)?,
    ] {
        if !r.passed {
            return Ok(CheckReport::fail(NAME, r.params, format!("{}: {}", r.name, r.detail)));
        }
    }
    Ok(CheckReport::pass(NAME, uw_params(u, w, m), ""))
}

fn pair_params(u1: &FreeElem, u2: &FreeElem, f: &str, w: &WElem, m: &ModulePresentation) -> String {
    format!("u1={}, u2={}, f={f}, w={}", u1.render(), u2.render(), show(w, m))
}

fn dual_text(f: &DualFunctional, m: &ModulePresentation) -> String {
    format!("({})'", show(&f.0, m))
}

/// Product and iterate give the same rational function, each agrees with its
/// own nested series expansion on the window, and all poles lie on the
/// allowed locus.
pub fn verify_associativity(
    h: &HSpace,
    m: &ModulePresentation,
    u1: &FreeElem,
    u2: &FreeElem,
    f: &DualFunctional,
    w: &WElem,
    win: ExpWindow,
) -> Result<CheckReport> {
    verify_associativity_with(&Standard, h, m, u1, u2, f, w, win)
}

#[allow(clippy::too_many_arguments)]
pub fn verify_associativity_with(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    u1: &FreeElem,
    u2: &FreeElem,
    f: &DualFunctional,
    w: &WElem,
    win: ExpWindow,
) -> Result<CheckReport> {
    const NAME: &str = "associativity";
    let params = pair_params(u1, u2, &dual_text(f, m), w, m);
    let us = [u1.clone(), u2.clone()];
    let prod = matrix_coeff_product(h, m, &us, f, w)?;
    let iter = matrix_coeff_iterate(h, m, u1, u2, f, w)?;
    if !prod.poles_are_admissible() || !iter.poles_are_admissible() {
        return Ok(CheckReport::fail(
            NAME,
            params,
            format!("poles off the locus: product {prod}, iterate {iter}"),
        ));
    }
    if !ratfun_eq(&prod, &iter) {
        return Ok(CheckReport::fail(NAME, params, format!("product {prod} != iterate {iter}")));
    }
    let zw = window(&[("z1", win.0, win.1), ("z2", win.0, win.1)]);
    let series = product_series_bruteforce_with(vo, h, m, &us, w, f, &zw)?;
    let closed = expand_in_region(&prod, &Region::ordered(&["z1", "z2"]), &zw)?;
    if closed != series.poly {
        return Ok(CheckReport::fail(
            NAME,
            params,
            format!("rationality of product: expansion {closed} != series {}", series.poly),
        ));
    }
    let xw = window(&[("x0", win.0, win.1), ("x2", win.0, win.1)]);
    let iter_x = matrix_coeff_iterate_x(h, m, u1, u2, f, w)?;
    let series = iterate_series_bruteforce(h, m, u1, u2, w, f, &xw)?;
    let closed = expand_in_region(&iter_x, &Region::ordered(&["x2", "x0"]), &xw)?;
    if closed != series.poly {
        return Ok(CheckReport::fail(
            NAME,
            params,
            format!("rationality of iterate: expansion {closed} != series {}", series.poly),
        ));
    }
    Ok(CheckReport::pass(NAME, params, format!("{prod}")))
}

/// Product against iterate for every dual basis vector of word weight at
/// most `max_weight` at once. Returns the report and the number of
/// coefficients compared.
pub fn verify_associativity_all(
    h: &HSpace,
    m: &ModulePresentation,
    u1: &FreeElem,
    u2: &FreeElem,
    w: &WElem,
    max_weight: u32,
) -> Result<(CheckReport, usize)> {
    const NAME: &str = "associativity";
    let rule = PairingRule::AllMatchings;
    let prod = product_coefficients(h, m, &[u1.clone(), u2.clone()], w, max_weight, rule)?;
    let iter = iterate_coefficients(h, m, u1, u2, w, max_weight, rule)?;
    let zero = RatFun::zero();
    let mut keys: Vec<&Key> = prod.keys().chain(iter.keys()).collect();
    keys.sort();
    keys.dedup();
    for k in &keys {
        let p = prod.get(*k).unwrap_or(&zero);
        let q = iter.get(*k).unwrap_or(&zero);
        if !p.poles_are_admissible() || !q.poles_are_admissible() || !ratfun_eq(p, q) {
            let f = format!("({})'", render_key(k, m.dim()));
            return Ok((
                CheckReport::fail(NAME, pair_params(u1, u2, &f, w, m), format!("product {p} vs iterate {q}")),
                keys.len(),
            ));
        }
    }
    let f = format!("all duals of word weight <= {max_weight}");
    Ok((CheckReport::pass(NAME, pair_params(u1, u2, &f, w, m), ""), keys.len()))
}

/// Multiset of `(index, mode)` pairs, kept sorted by `(mode, index)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymWord(Vec<(u32, usize)>);

impl SymWord {
    pub fn from_word(w: &NegWord) -> Self {
        let mut v: Vec<(u32, usize)> = w.factors().iter().map(|&(i, m)| (m, i)).collect();
        v.sort();
        SymWord(v)
    }

    /// `(index, mode)` pairs in canonical order.
    pub fn factors(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().map(|&(m, i)| (i, m))
    }

    pub fn weight(&self) -> u32 {
        self.0.iter().map(|p| p.0).sum()
    }

    fn count(&self, i: usize, m: u32) -> usize {
        self.0.iter().filter(|&&p| p == (m, i)).count()
    }

    fn insert(&self, i: usize, m: u32) -> Self {
        let mut v = self.0.clone();
        let at = v.partition_point(|&p| p < (m, i));
        v.insert(at, (m, i));
        SymWord(v)
    }

    fn remove(&self, i: usize, m: u32) -> Option<Self> {
        let at = self.0.iter().position(|&p| p == (m, i))?;
        let mut v = self.0.clone();
        v.remove(at);
        Some(SymWord(v))
    }
}

impl fmt::Display for SymWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.factors() {
            write!(f, "a{}(-{m})", i + 1)?;
        }
        f.write_str("1")
    }
}

pub type SymElem = BTreeMap<SymWord, Scalar>;

fn sym_add(acc: &mut SymElem, k: SymWord, c: Scalar) {
    if c.is_zero() {
        return;
    }
    let e = acc.entry(k.clone()).or_insert_with(Scalar::zero);
    *e += c;
    if e.is_zero() {
        acc.remove(&k);
    }
}

pub fn project_to_sym(u: &FreeElem) -> SymElem {
    let mut out = SymElem::new();
    for (w, c) in u.terms() {
        sym_add(&mut out, SymWord::from_word(w), c.clone());
    }
    out
}

pub fn render_sym(s: &SymElem) -> String {
    if s.is_empty() {
        return "0".into();
    }
    join_signed(s.iter().map(|(k, c)| coeff_prefix(c, &k.to_string())))
}

/// `pi(Y(u, x) v)` agrees with `pi(Y(u', x) v')` whenever `pi u = pi u'`
/// and `pi v = pi v'`.
pub fn verify_quotient_homomorphism(
    vo: &dyn VertexOperator,
    h: &HSpace,
    (u, u2): (&FreeElem, &FreeElem),
    (v, v2): (&FreeElem, &FreeElem),
    win: ExpWindow,
) -> Result<CheckReport> {
    const NAME: &str = "quotient";
    let params = format!("u={}, u'={}, v={}, v'={}", u.render(), u2.render(), v.render(), v2.render());
    if project_to_sym(u) != project_to_sym(u2) || project_to_sym(v) != project_to_sym(v2) {
        return Ok(CheckReport::fail(NAME, params, "arguments do not share a projection"));
    }
    let t = ModulePresentation::trivial(h.dim());
    let (vw, vw2) = (free_to_welem(v), free_to_welem(v2));
    let (sa, sb) = (vo.series(h, &t, u, &vw, win.0, win.1)?, vo.series(h, &t, u2, &vw2, win.0, win.1)?);
    for e in win.0..=win.1 {
        let a = project_to_sym(&welem_to_free(&at(&sa, e)));
        let b = project_to_sym(&welem_to_free(&at(&sb, e)));
        if a != b {
            return Ok(CheckReport::fail(
                NAME,
                params,
                format!("x^{e}: {} vs {}", render_sym(&a), render_sym(&b)),
            ));
        }
    }
    Ok(CheckReport::pass(NAME, params, ""))
}

/// Commutative Heisenberg Fock space: polynomials in `p_{i,m} = a_i(-m)`,
/// with `a_i(n) = n sum_j (a_i, a_j) d/dp_{j,n}` for `n > 0`. Needs a
/// symmetric form.
pub struct FreeBoson<'a> {
    h: &'a HSpace,
}

impl<'a> FreeBoson<'a> {
    pub fn new(h: &'a HSpace) -> Self {
        FreeBoson { h }
    }

    fn annihilate(&self, i: usize, n: u32, v: &SymElem) -> SymElem {
        let mut out = SymElem::new();
        for (k, c) in v {
            for j in 0..self.h.dim() {
                let g = self.h.form(i, j);
                if g.is_zero() {
                    continue;
                }
                let mult = k.count(j, n);
                if let Some(rest) = k.remove(j, n) {
                    sym_add(&mut out, rest, c * g * int(n as i64) * int(mult as i64));
                }
            }
        }
        out
    }

    fn create(i: usize, s: u32, v: &SymElem) -> SymElem {
        v.iter().map(|(k, c)| (k.insert(i, s), c.clone())).collect()
    }

    /// Coefficient of `x^e` in `Y(u, x) v` where `Y` of a monomial is the
    /// commutative normal-ordered product of its derivative fields.
    pub fn coefficient(&self, u: &SymElem, e: i64, v: &SymElem) -> SymElem {
        let mut out = SymElem::new();
        for (word, c) in u {
            let factors: Vec<(usize, u32)> = word.factors().collect();
            let start: SymElem = v.iter().map(|(k, x)| (k.clone(), x * c)).collect();
            self.annihilators(&factors, 0, e, start, Vec::new(), &mut out);
        }
        out
    }

    /// Factor `j` either annihilates with mode `n >= 1` or is left for creation.
    fn annihilators(
        &self,
        fs: &[(usize, u32)],
        j: usize,
        e: i64,
        state: SymElem,
        creators: Vec<(usize, u32)>,
        out: &mut SymElem,
    ) {
        if state.is_empty() {
            return;
        }
        if j == fs.len() {
            // creators: modes -s with s >= m, exponents s - m summing to e
            if e >= 0 {
                self.creation(&creators, 0, e, state, out);
            }
            return;
        }
        let (i, m) = fs[j];
        let mut with = creators.clone();
        with.push((i, m));
        self.annihilators(fs, j + 1, e, state.clone(), with, out);
        let top = state.keys().map(SymWord::weight).max().unwrap_or(0);
        for n in 1..=top {
            let c = binom_q(-(n as i64) - 1, m - 1);
            let next: SymElem = self
                .annihilate(i, n, &state)
                .into_iter()
                .map(|(k, x)| (k, x * &c))
                .collect();
            // contributes x^{-n-m}
            self.annihilators(fs, j + 1, e + (n + m) as i64, next, creators.clone(), out);
        }
    }

    fn creation(&self, cs: &[(usize, u32)], j: usize, left: i64, state: SymElem, out: &mut SymElem) {
        if j == cs.len() {
            if left == 0 {
                for (k, c) in state {
                    sym_add(out, k, c);
                }
            }
            return;
        }
        let (i, m) = cs[j];
        for t in 0..=left {
            let s = m + t as u32;
            let c = binom_q(s as i64 - 1, m - 1);
            let next: SymElem = Self::create(i, s, &state)
                .into_iter()
                .map(|(k, x)| (k, x * &c))
                .collect();
            self.creation(cs, j + 1, left - t, next, out);
        }
    }
}

/// Compares `pi(Y_T(u, x) v)` with the commutative Fock-space computation on
/// every exponent in the window. Returns the report and the number of
/// nonzero coefficients compared.
pub fn verify_free_boson(
    vo: &dyn VertexOperator,
    h: &HSpace,
    u: &FreeElem,
    v: &FreeElem,
    win: ExpWindow,
) -> Result<(CheckReport, usize)> {
    const NAME: &str = "free_boson";
    let params = format!("u={}, v={}", u.render(), v.render());
    if !validate_hspace(h, false, true).passed() {
        return Ok((CheckReport::pass(NAME, params, "skipped: form is not symmetric"), 0));
    }
    let t = ModulePresentation::trivial(h.dim());
    let fb = FreeBoson::new(h);
    let (su, sv) = (project_to_sym(u), project_to_sym(v));
    let mut compared = 0;
    let sa = vo.series(h, &t, u, &free_to_welem(v), win.0, win.1)?;
    for e in win.0..=win.1 {
        let a = project_to_sym(&welem_to_free(&at(&sa, e)));
        let b = fb.coefficient(&su, e, &sv);
        if a != b {
            return Ok((
                CheckReport::fail(NAME, params, format!("x^{e}: {} vs Fock {}", render_sym(&a), render_sym(&b))),
                compared,
            ));
        }
        compared += a.len();
    }
    Ok((CheckReport::pass(NAME, params, ""), compared))
}

/// Two orders of a product of vertex operators that give different rational
/// functions against the same dual and state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub u1: FreeElem,
    pub u2: FreeElem,
    pub f: Key,
    pub w: Key,
    /// `<f, Y(u1, z1) Y(u2, z2) w>`
    pub forward: RatFun,
    /// `<f, Y(u2, z2) Y(u1, z1) w>`
    pub swapped: RatFun,
}

impl Witness {
    pub fn render(&self, m: &ModulePresentation) -> String {
        let r = m.dim();
        format!(
            "u1={}, u2={}, f=({})', w={}: {} vs {}",
            self.u1.render(),
            self.u2.render(),
            render_key(&self.f, r),
            render_key(&self.w, r),
            self.forward,
            self.swapped
        )
    }
}

/// Outcome of the witness search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessSearch {
    Found(Box<Witness>),
    /// Every pair of words of weight at most `max_weight` was tried.
    Exhausted { max_weight: u32 },
}

fn swap_z(r: &RatFun) -> Result<RatFun> {
    let map = [
        ("z1".to_string(), [("z2".to_string(), 1)].into_iter().collect()),
        ("z2".to_string(), [("z1".to_string(), 1)].into_iter().collect()),
    ]
    .into_iter()
    .collect();
    substitute_vars(r, &map)
}

/// Searches word pairs by total weight, states `1 (x) e_s`, and dual basis
/// vectors of word weight at most `wt(u1) + wt(u2)` ordered by weight.
pub fn noncommutativity_witness(
    h: &HSpace,
    m: &ModulePresentation,
    max_weight: u32,
) -> Result<WitnessSearch> {
    let words: Vec<NegWord> = words_up_to(h.dim(), max_weight)
        .into_iter()
        .filter(|w| !w.is_empty())
        .collect();
    let mut pairs: Vec<(&NegWord, &NegWord)> = words.iter().flat_map(|a| words.iter().map(move |b| (a, b))).collect();
    pairs.sort_by_key(|(a, b)| (a.weight() + b.weight(), (*a).clone(), (*b).clone()));
    let rule = PairingRule::AllMatchings;
    let zero = RatFun::zero();
    for (a, b) in pairs {
        let (u1, u2) = (FreeElem::word(a.clone()), FreeElem::word(b.clone()));
        let top = a.weight() + b.weight();
        for s in 0..m.dim() {
            let w = WElem::vacuum(s);
            let fwd = product_coefficients(h, m, &[u1.clone(), u2.clone()], &w, top, rule)?;
            let rev = product_coefficients(h, m, &[u2.clone(), u1.clone()], &w, top, rule)?;
            let mut keys: Vec<&Key> = fwd.keys().chain(rev.keys()).collect();
            keys.sort_by_key(|k| (k.0.weight(), (*k).clone()));
            keys.dedup();
            for k in keys {
                let p = fwd.get(k).unwrap_or(&zero);
                let q = swap_z(rev.get(k).unwrap_or(&zero))?;
                if !ratfun_eq(p, &q) {
                    return Ok(WitnessSearch::Found(Box::new(Witness {
                        u1,
                        u2,
                        f: k.clone(),
                        w: (NegWord::vacuum(), s),
                        forward: p.clone(),
                        swapped: q,
                    })));
                }
            }
        }
    }
    Ok(WitnessSearch::Exhausted { max_weight })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckKind {
    IdentityCreation,
    LowerBound,
    DBracket,
    DProperties,
    Associativity,
    Quotient,
    FreeBoson,
    Witness,
}

impl CheckKind {
    pub const ALL: [CheckKind; 8] = [
        CheckKind::IdentityCreation,
        CheckKind::LowerBound,
        CheckKind::DBracket,
        CheckKind::DProperties,
        CheckKind::Associativity,
        CheckKind::Quotient,
        CheckKind::FreeBoson,
        CheckKind::Witness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::IdentityCreation => "identity_creation",
            CheckKind::LowerBound => "lower_bound",
            CheckKind::DBracket => "d_bracket",
            CheckKind::DProperties => "D_properties",
            CheckKind::Associativity => "associativity",
            CheckKind::Quotient => "quotient",
            CheckKind::FreeBoson => "free_boson",
            CheckKind::Witness => "witness",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteConfig {
    /// Largest weight of sampled elements.
    pub max_weight: u32,
    /// Every basis word up to this weight is sampled.
    pub exhaustive_weight: u32,
    /// Extra seeded-random homogeneous elements.
    pub samples: usize,
    pub window: ExpWindow,
    pub seed: u64,
    pub checks: Vec<CheckKind>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            max_weight: 4,
            exhaustive_weight: 2,
            samples: 6,
            window: (-6, 3),
            seed: 0,
            checks: CheckKind::ALL.to_vec(),
        }
    }
}

fn random_elem(rng: &mut ChaCha8Rng, d: usize, max_weight: u32) -> FreeElem {
    let n = rng.gen_range(1..=max_weight.max(1));
    let words = enumerate_words(d, n);
    let coeffs = [int(1), int(-1), int(2), ratio(1, 2)];
    let mut u = FreeElem::zero();
    for _ in 0..rng.gen_range(1..=2) {
        let w = words[rng.gen_range(0..words.len())].clone();
        u.add_term(w, coeffs[rng.gen_range(0..coeffs.len())].clone());
    }
    if u.is_zero() {
        u = FreeElem::word(words[0].clone());
    }
    u
}

/// Elements and states exercised by the suite.
pub struct Samples {
    pub elements: Vec<FreeElem>,
    pub states: Vec<WElem>,
}

pub fn suite_samples(h: &HSpace, m: &ModulePresentation, cfg: &SuiteConfig) -> Samples {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut elements: Vec<FreeElem> = words_up_to(h.dim(), cfg.exhaustive_weight)
        .into_iter()
        .map(FreeElem::word)
        .collect();
    for _ in 0..cfg.samples {
        elements.push(random_elem(&mut rng, h.dim(), cfg.max_weight));
    }
    let mut states: Vec<WElem> = (0..m.dim()).map(WElem::vacuum).collect();
    for i in 0..h.dim() {
        states.push(WElem::basis(NegWord::new(vec![(i, 1)]), rng.gen_range(0..m.dim())));
    }
    for _ in 0..cfg.samples.min(2) {
        let u = random_elem(&mut rng, h.dim(), 2);
        let s = rng.gen_range(0..m.dim());
        states.push(WElem::from_terms(u.terms().map(|(w, c)| ((w.clone(), s), c.clone()))));
    }
    Samples { elements, states }
}

fn first_failure(
    name: &str,
    reports: impl IntoIterator<Item = Result<CheckReport>>,
) -> Result<CheckReport> {
    let mut n = 0;
    for r in reports {
        let r = r?;
        if !r.passed {
            return Ok(r);
        }
        n += 1;
    }
    Ok(CheckReport::pass(name, format!("{n} instances"), ""))
}

fn homogeneous_parts(w: &WElem, m: &ModulePresentation) -> Vec<WElem> {
    w.homogeneous_components(m).into_values().collect()
}

fn run_check(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    cfg: &SuiteConfig,
    s: &Samples,
    kind: CheckKind,
) -> Result<CheckReport> {
    let win = cfg.window;
    let name = kind.name();
    let grid = || {
        s.elements
            .iter()
            .flat_map(|u| s.states.iter().map(move |w| (u, w)))
    };
    match kind {
        CheckKind::IdentityCreation => verify_identity_creation(vo, h, m, &s.elements, &s.states, win),
        CheckKind::LowerBound => first_failure(name, grid().map(|(u, w)| verify_lower_bound(vo, h, m, u, w, win))),
        CheckKind::DBracket => first_failure(
            name,
            grid().flat_map(|(u, w)| {
                u.homogeneous_components()
                    .into_values()
                    .flat_map(|p| homogeneous_parts(w, m).into_iter().map(move |q| (p.clone(), q)))
                    .map(|(p, q)| verify_d_bracket(vo, h, m, &p, &q, win))
                    .collect::<Vec<_>>()
            }),
        ),
        CheckKind::DProperties => {
            first_failure(name, grid().map(|(u, w)| verify_D_properties(vo, h, m, u, w, win)))
        }
        CheckKind::Associativity => {
            let mut reports = Vec::new();
            let small: Vec<&FreeElem> = s.elements.iter().filter(|u| u.max_weight() <= 1).collect();
            for u1 in &s.elements {
                for u2 in &s.elements {
                    for w in s.states.iter().take(m.dim()) {
                        let top = u1.max_weight() + u2.max_weight() + 1;
                        reports.push(verify_associativity_all(h, m, u1, u2, w, top).map(|r| r.0));
                    }
                }
            }
            // rationality against nested series on the lowest weights
            let duals: Vec<DualFunctional> = words_up_to(h.dim(), 2)
                .into_iter()
                .flat_map(|w| (0..m.dim()).map(move |s| DualFunctional::basis(w.clone(), s)))
                .collect();
            for u1 in &small {
                for u2 in &small {
                    for f in &duals {
                        for w in s.states.iter().take(m.dim()) {
                            reports.push(verify_associativity_with(vo, h, m, u1, u2, f, w, (win.0.max(-4), win.1.min(2))));
                        }
                    }
                }
            }
            first_failure(name, reports)
        }
        CheckKind::Quotient => {
            let mut reports = Vec::new();
            let words = words_up_to(h.dim(), cfg.exhaustive_weight.max(2));
            let mut classes: BTreeMap<SymWord, Vec<NegWord>> = BTreeMap::new();
            for w in words {
                classes.entry(SymWord::from_word(&w)).or_default().push(w);
            }
            let classes: Vec<Vec<NegWord>> = classes.into_values().collect();
            for cu in &classes {
                for cv in &classes {
                    let (u0, v0) = (FreeElem::word(cu[0].clone()), FreeElem::word(cv[0].clone()));
                    for u in cu {
                        for v in cv {
                            let (u, v) = (FreeElem::word(u.clone()), FreeElem::word(v.clone()));
                            reports.push(verify_quotient_homomorphism(vo, h, (&u0, &u), (&v0, &v), win));
                        }
                    }
                }
            }
            first_failure(name, reports)
        }
        CheckKind::FreeBoson => {
            let mut total = 0;
            for u in &s.elements {
                for v in words_up_to(h.dim(), 2) {
                    let (r, n) = verify_free_boson(vo, h, u, &FreeElem::word(v), win)?;
                    if !r.passed {
                        return Ok(r);
                    }
                    total += n;
                }
            }
            Ok(CheckReport::pass(name, format!("{total} coefficients"), ""))
        }
        CheckKind::Witness => {
            let top = cfg.exhaustive_weight.max(2);
            match noncommutativity_witness(h, m, top)? {
                WitnessSearch::Found(w) => Ok(CheckReport::pass(name, "", w.render(m))),
                WitnessSearch::Exhausted { max_weight } => Ok(CheckReport::pass(
                    name,
                    "",
                    format!("none found among words of weight <= {max_weight}"),
                )),
            }
        }
    }
}

/// Runs the configured checks; reports come back in the configured order.
pub fn run_suite(h: &HSpace, m: &ModulePresentation, cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    run_suite_with(&Standard, h, m, cfg)
}

pub fn run_suite_with(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    cfg: &SuiteConfig,
) -> Result<Vec<CheckReport>> {
    let samples = suite_samples(h, m, cfg);
    std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .checks
            .iter()
            .map(|&k| {
                let samples = &samples;
                scope.spawn(move || run_check(vo, h, m, cfg, samples, k))
            })
            .collect();
        handles
            .into_iter()
            .map(|t| t.join().expect("check thread panicked"))
            .collect()
    })
}
