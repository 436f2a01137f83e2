//! Text forms of elements.
//!
//! ```text
//! elem := ['-'] term (('+' | '-') term)*  |  '0'
//! term := [rational '*'] word
//! word := gen* ('1' | 'e' INDEX)
//! gen  := 'a' INDEX '(' ['-'] INT ')'
//! ```
//!
//! The `e<k>` ending names the `k`-th basis vector of the module; `1` is the
//! first one. Hat words for normal forms use `gen | 'k'` without an ending.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::halgebra::{FreeElem, HatGenerator, NegWord};
use crate::module::{DualFunctional, WElem};
use crate::scalar::Scalar;

/// One term of an element expression; indices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermExpr {
    pub coeff: Scalar,
    /// `(index, mode, byte offset of the mode)`
    pub gens: Vec<(usize, i64, usize)>,
    pub module_index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ElemExpr {
    pub terms: Vec<TermExpr>,
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            s: text.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, b: u8) -> Result<()> {
        if self.eat(b) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{}`", b as char)))
        }
    }

    fn unexpected(&mut self, wanted: &str) -> Error {
        match self.peek() {
            Some(c) => Error::parse(self.pos, format!("expected {wanted}, found `{}`", c as char)),
            None => Error::parse(self.pos, format!("expected {wanted}, found end of input")),
        }
    }

    fn digits(&mut self) -> Result<(BigInt, usize)> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.unexpected("digits"));
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        Ok((text.parse().unwrap(), start))
    }

    fn small(&mut self) -> Result<(i64, usize)> {
        let (n, at) = self.digits()?;
        let v = i64::try_from(n).map_err(|_| Error::parse(at, "number too large"))?;
        Ok((v, at))
    }

    fn index(&mut self, dim: usize) -> Result<usize> {
        let (k, _) = self.small()?;
        if k < 1 || k as usize > dim {
            return Err(Error::IndexOutOfRange {
                index: k as usize,
                dim,
            });
        }
        Ok(k as usize - 1)
    }

    fn gen(&mut self, dim: usize) -> Result<(usize, i64, usize)> {
        self.expect(b'a')?;
        let i = self.index(dim)?;
        self.expect(b'(')?;
        self.skip_ws();
        let at = self.pos;
        let neg = self.eat(b'-');
        let (n, _) = self.small()?;
        self.expect(b')')?;
        Ok((i, if neg { -n } else { n }, at))
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
}

fn parse_term(c: &mut Cursor, dim: usize, r: usize, sign: bool) -> Result<TermExpr> {
    let mut coeff = Scalar::one();
    // a leading number is either a coefficient or the vacuum ending
    if matches!(c.peek(), Some(b'0'..=b'9')) {
        let save = c.pos;
        let (p, at) = c.digits()?;
        let mut q = BigInt::one();
        let mut fraction = false;
        if c.eat(b'/') {
            q = c.digits()?.0;
            fraction = true;
            if q.is_zero() {
                return Err(Error::parse(at, "zero denominator"));
            }
        }
        if c.eat(b'*') {
            coeff = Scalar::new(p, q);
        } else if !fraction && p.is_one() {
            c.pos = save;
        } else {
            return Err(c.unexpected("`*`"));
        }
    }
    let mut gens = Vec::new();
    loop {
        match c.peek() {
            Some(b'a') => gens.push(c.gen(dim)?),
            Some(b'1') => {
                c.pos += 1;
                if matches!(c.s.get(c.pos), Some(b'0'..=b'9')) {
                    return Err(Error::parse(c.pos - 1, "expected `1` ending a word"));
                }
                return Ok(TermExpr {
                    coeff: if sign { -coeff } else { coeff },
                    gens,
                    module_index: 0,
                });
            }
            Some(b'e') => {
                c.pos += 1;
                let (k, _) = c.small()?;
                if k < 1 || k as usize > r {
                    return Err(Error::ModuleIndexOutOfRange {
                        index: k as usize,
                        dim: r,
                    });
                }
                return Ok(TermExpr {
                    coeff: if sign { -coeff } else { coeff },
                    gens,
                    module_index: k as usize - 1,
                });
            }
            _ => return Err(c.unexpected("`a`, `1` or `e`")),
        }
    }
}

/// Parses an element over `dim` generators and an `r`-dimensional module.
pub fn parse_elem_in(text: &str, dim: usize, r: usize) -> Result<ElemExpr> {
    let mut c = Cursor::new(text);
    if c.peek() == Some(b'0') {
        c.pos += 1;
        if c.at_end() {
            return Ok(ElemExpr::default());
        }
        return Err(c.unexpected("end of input"));
    }
    let mut terms = Vec::new();
    let mut sign = c.eat(b'-');
    loop {
        terms.push(parse_term(&mut c, dim, r, sign)?);
        if c.at_end() {
            break;
        }
        sign = if c.eat(b'+') {
            false
        } else if c.eat(b'-') {
            true
        } else {
            return Err(c.unexpected("`+`, `-` or end of input"));
        };
    }
    Ok(ElemExpr { terms })
}

pub fn parse_elem(text: &str, dim: usize) -> Result<ElemExpr> {
    parse_elem_in(text, dim, 1)
}

impl ElemExpr {
    fn key(t: &TermExpr) -> Result<NegWord> {
        let mut f = Vec::with_capacity(t.gens.len());
        for &(i, n, at) in &t.gens {
            if n >= 0 {
                return Err(Error::parse(at, format!("mode {n} must be negative")));
            }
            f.push((i, (-n) as u32));
        }
        Ok(NegWord::new(f))
    }

    pub fn to_free(&self) -> Result<FreeElem> {
        let mut out = FreeElem::zero();
        for t in &self.terms {
            out.add_term(Self::key(t)?, t.coeff.clone());
        }
        Ok(out)
    }

    pub fn to_welem(&self) -> Result<WElem> {
        let mut out = WElem::zero();
        for t in &self.terms {
            out.add_term((Self::key(t)?, t.module_index), t.coeff.clone());
        }
        Ok(out)
    }
}

pub fn parse_free(text: &str, dim: usize) -> Result<FreeElem> {
    parse_elem(text, dim)?.to_free()
}

pub fn parse_welem(text: &str, dim: usize, r: usize) -> Result<WElem> {
    parse_elem_in(text, dim, r)?.to_welem()
}

/// Dual functionals use the element grammar in the dual basis.
pub fn parse_dual(text: &str, dim: usize, r: usize) -> Result<DualFunctional> {
    Ok(DualFunctional(parse_welem(text, dim, r)?))
}

/// A word in the generators of the affinization, e.g. `a1(1)a1(-1)k`.
pub fn parse_hat_word(text: &str, dim: usize) -> Result<Vec<HatGenerator>> {
    let mut c = Cursor::new(text);
    let mut out = Vec::new();
    loop {
        match c.peek() {
            None => return Ok(out),
            Some(b'k') => {
                c.pos += 1;
                out.push(HatGenerator::Central);
            }
            Some(b'a') => {
                let (index, mode, _) = c.gen(dim)?;
                out.push(HatGenerator::Mode { index, mode });
            }
            Some(b'1') if out.is_empty() => {
                c.pos += 1;
                if !c.at_end() {
                    return Err(c.unexpected("end of input"));
                }
            }
            _ => return Err(c.unexpected("`a` or `k`")),
        }
    }
}
