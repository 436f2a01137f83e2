//! Exact rational scalars and the generalized binomial coefficients that
//! appear in derivatives of fields.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational; always stored reduced with a positive
/// denominator.
pub type Scalar = BigRational;

pub fn int(n: i64) -> Scalar {
    Scalar::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> Scalar {
    Scalar::new(BigInt::from(p), BigInt::from(q))
}

/// `binom(top, k) = top (top-1) ... (top-k+1) / k!` for any integer `top`.
pub fn binom(top: i64, k: u32) -> BigInt {
    if let Some(v) = binom_small(top, k) {
        return BigInt::from(v);
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for j in 0..k as i64 {
        num *= BigInt::from(top - j);
        den *= BigInt::from(j + 1);
    }
    num / den
}

fn binom_small(top: i64, k: u32) -> Option<i128> {
    // exact at every step: the running value is binom(top, j)
    let mut v: i128 = 1;
    for j in 0..k as i128 {
        v = v.checked_mul(top as i128 - j)? / (j + 1);
    }
    Some(v)
}

/// `a * b`, skipping the gcd when both are integers.
pub fn mul(a: &Scalar, b: &Scalar) -> Scalar {
    if a.is_integer() && b.is_integer() {
        Scalar::from_integer(a.numer() * b.numer())
    } else {
        a * b
    }
}

/// `acc += c`, skipping the gcd when both are integers.
pub fn add_to(acc: &mut Scalar, c: &Scalar) {
    if acc.is_integer() && c.is_integer() {
        *acc = Scalar::from_integer(acc.numer() + c.numer());
    } else {
        *acc += c;
    }
}

pub fn binom_q(top: i64, k: u32) -> Scalar {
    Scalar::from_integer(binom(top, k))
}

/// Parses `p/q`, `-p/q` or an integer.
pub fn parse_scalar(text: &str) -> Result<Scalar> {
    let t = text.trim();
    let bad = || Error::parse(0, format!("invalid rational `{t}`"));
    let (p, q) = match t.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (t, "1"),
    };
    let p: BigInt = p.parse().map_err(|_| bad())?;
    let q: BigInt = q.parse().map_err(|_| bad())?;
    if q.is_zero() {
        return Err(Error::parse(0, format!("zero denominator in `{t}`")));
    }
    Ok(Scalar::new(p, q))
}

/// `p/q`, or just `p` for integers.
pub fn render(s: &Scalar) -> String {
    if s.is_integer() {
        s.numer().to_string()
    } else {
        format!("{}/{}", s.numer(), s.denom())
    }
}

/// Always `p/q`; the JSON wire form.
pub fn render_pq(s: &Scalar) -> String {
    format!("{}/{}", s.numer(), s.denom())
}

/// Renders `c*body` with the conventions shared by every text format:
/// unit coefficients are dropped, negative ones produce a leading `-`.
/// Returns `(is_negative, text_without_sign)`.
pub(crate) fn coeff_prefix(c: &Scalar, body: &str) -> (bool, String) {
    let neg = c.is_negative();
    let a = c.abs();
    let text = if body.is_empty() {
        render(&a)
    } else if a.is_one() {
        body.to_string()
    } else {
        format!("{}*{}", render(&a), body)
    };
    (neg, text)
}

/// Joins signed terms as `t1 + t2 - t3`.
pub(crate) fn join_signed(terms: impl IntoIterator<Item = (bool, String)>) -> String {
    let mut out = String::new();
    for (i, (neg, t)) in terms.into_iter().enumerate() {
        match (i, neg) {
            (0, false) => out.push_str(&t),
            (0, true) => {
                out.push('-');
                out.push_str(&t);
            }
            (_, false) => {
                out.push_str(" + ");
                out.push_str(&t);
            }
            (_, true) => {
                out.push_str(" - ");
                out.push_str(&t);
            }
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}
