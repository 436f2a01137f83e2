//! Vertex operators computed mode by mode.
//!
//! `Y(a_1(-m_1)...a_k(-m_k)1, x)` is the normal-ordered product of the
//! fields `(1/(m-1)!) d^{m-1}/dx^{m-1} a(x)`. Everything here enumerates
//! mode tuples directly and applies them with [`apply_mode`]; it serves as
//! the reference against which the contraction formulas are checked.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::halgebra::{FreeElem, HSpace, NegWord};
use crate::module::{apply_mode, apply_mode_key, pairing, DualFunctional, ModulePresentation, WElem};
use crate::ratfun::{LaurentPoly, Window};
use crate::scalar::{binom_q, mul, Scalar};

/// Coefficient of `a(n) x^{-n-m}` in `(1/(m-1)!) d^{m-1}/dx^{m-1} a(x)`.
pub fn field_coefficient(m: u32, n: i64) -> Scalar {
    assert!(m >= 1, "field order must be positive");
    binom_q(-n - 1, m - 1)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeMonomial {
    pub modes: Vec<(usize, i64)>,
    pub coeff: Scalar,
}

impl ModeMonomial {
    pub fn new(modes: Vec<(usize, i64)>) -> Self {
        ModeMonomial {
            modes,
            coeff: Scalar::one(),
        }
    }
}

/// A permutation preserving the relative order inside three consecutive
/// blocks of sizes `alpha`, `beta - alpha`, `k - beta`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedSplit {
    pub k: usize,
    pub alpha: usize,
    pub beta: usize,
    /// `sigma[j]` is the original position placed at slot `j`.
    pub sigma: Vec<usize>,
}

impl OrderedSplit {
    pub fn is_valid(&self) -> bool {
        let inc = |r: std::ops::Range<usize>| self.sigma[r].windows(2).all(|w| w[0] < w[1]);
        let mut seen = self.sigma.clone();
        seen.sort_unstable();
        self.alpha <= self.beta
            && self.beta <= self.k
            && seen == (0..self.k).collect::<Vec<_>>()
            && inc(0..self.alpha)
            && inc(self.alpha..self.beta)
            && inc(self.beta..self.k)
    }
}

/// Every permutation in `J(k; alpha, beta)`.
pub fn ordered_splits(k: usize, alpha: usize, beta: usize) -> Vec<OrderedSplit> {
    assert!(alpha <= beta && beta <= k);
    // choose which positions go to the first block, then to the second
    fn subsets(from: &[usize], size: usize) -> Vec<Vec<usize>> {
        if size == 0 {
            return vec![Vec::new()];
        }
        if from.len() < size {
            return Vec::new();
        }
        let mut out = Vec::new();
        for mut s in subsets(&from[1..], size - 1) {
            s.insert(0, from[0]);
            out.push(s);
        }
        out.extend(subsets(&from[1..], size));
        out
    }
    let all: Vec<usize> = (0..k).collect();
    let mut out = Vec::new();
    for first in subsets(&all, alpha) {
        let rest: Vec<usize> = all.iter().copied().filter(|i| !first.contains(i)).collect();
        for second in subsets(&rest, beta - alpha) {
            let third: Vec<usize> = rest.iter().copied().filter(|i| !second.contains(i)).collect();
            let mut sigma = first.clone();
            sigma.extend(&second);
            sigma.extend(third);
            out.push(OrderedSplit { k, alpha, beta, sigma });
        }
    }
    out
}

/// The split realising normal ordering: negative modes, then positive, then
/// zero, each block in its original order.
pub fn normal_ordering_split(mono: &ModeMonomial) -> OrderedSplit {
    let idx = |pred: fn(i64) -> bool| -> Vec<usize> {
        mono.modes
            .iter()
            .enumerate()
            .filter(|(_, (_, n))| pred(*n))
            .map(|(p, _)| p)
            .collect()
    };
    let neg = idx(|n| n < 0);
    let pos = idx(|n| n > 0);
    let zero = idx(|n| n == 0);
    let alpha = neg.len();
    let beta = alpha + pos.len();
    let mut sigma = neg;
    sigma.extend(pos);
    sigma.extend(zero);
    OrderedSplit {
        k: mono.modes.len(),
        alpha,
        beta,
        sigma,
    }
}

/// Stable reordering; no contraction terms are produced.
pub fn normal_order_monomial(mono: &ModeMonomial) -> ModeMonomial {
    let s = normal_ordering_split(mono);
    ModeMonomial {
        modes: s.sigma.iter().map(|&p| mono.modes[p]).collect(),
        coeff: mono.coeff.clone(),
    }
}

/// Applies a monomial to `w`, rightmost mode first.
pub fn apply_monomial(
    h: &HSpace,
    m: &ModulePresentation,
    mono: &ModeMonomial,
    w: &WElem,
) -> Result<WElem> {
    let mut cur = w.scale(&mono.coeff);
    for &(i, n) in mono.modes.iter().rev() {
        if cur.is_zero() {
            break;
        }
        cur = apply_mode(h, m, i, n, &cur)?;
    }
    Ok(cur)
}

/// A way of producing the coefficients `u_s w` of `Y(u, x) w`.
pub trait VertexOperator: Sync {
    fn coefficient(
        &self,
        h: &HSpace,
        m: &ModulePresentation,
        u: &FreeElem,
        s: i64,
        w: &WElem,
    ) -> Result<WElem>;

    /// Coefficients of `x^e` in `Y(u, x) w` for `e` in `[lo, hi]`.
    fn series(
        &self,
        h: &HSpace,
        m: &ModulePresentation,
        u: &FreeElem,
        w: &WElem,
        lo: i64,
        hi: i64,
    ) -> Result<BTreeMap<i64, WElem>> {
        (lo..=hi)
            .map(|e| Ok((e, self.coefficient(h, m, u, -e - 1, w)?)))
            .collect()
    }
}

/// The vertex operator map defined by normal-ordered products of fields.
#[derive(Clone, Copy, Debug, Default)]
pub struct Standard;

impl VertexOperator for Standard {
    fn coefficient(
        &self,
        h: &HSpace,
        m: &ModulePresentation,
        u: &FreeElem,
        s: i64,
        w: &WElem,
    ) -> Result<WElem> {
        vertex_coefficient(h, m, u, s, w)
    }

    fn series(
        &self,
        h: &HSpace,
        m: &ModulePresentation,
        u: &FreeElem,
        w: &WElem,
        lo: i64,
        hi: i64,
    ) -> Result<BTreeMap<i64, WElem>> {
        coefficient_range(h, m, u, w, lo, hi)
    }
}

fn check_indices(h: &HSpace, u: &FreeElem) -> Result<()> {
    for (word, _) in u.terms() {
        for &(i, _) in word.factors() {
            h.check_index(i)?;
        }
    }
    Ok(())
}

/// Accumulates `c * word_{(e)} w` for `e` in `[lo, hi]`, where `word_{(e)}`
/// is the coefficient of `x^e` in the field of `word`.
///
/// Each factor is either a zero mode (only when its `rho` is nonzero), a
/// positive mode or a creation mode. The normal-ordered monomial is applied
/// zero modes first, then positive modes, then creation modes; positive modes
/// are only tried where they can contract with a factor of the state.
fn word_series(
    h: &HSpace,
    m: &ModulePresentation,
    word: &NegWord,
    c: &Scalar,
    w: &WElem,
    (lo, hi): (i64, i64),
    out: &mut BTreeMap<i64, WElem>,
) {
    let fs = word.factors();
    let k = fs.len();
    let mut classes = vec![0u8; k];
    loop {
        if (0..k).all(|j| classes[j] != 2 || !m.rho_is_zero(fs[j].0)) {
            let mut state = w.scale(c);
            let mut exp = 0i64;
            for j in (0..k).rev().filter(|&j| classes[j] == 2) {
                let (i, mj) = fs[j];
                state = apply_mode_unchecked(h, m, i, 0, &state).scale(&field_coefficient(mj, 0));
                exp -= mj as i64;
            }
            let pos: Vec<usize> = (0..k).rev().filter(|&j| classes[j] == 1).collect();
            let neg: Vec<usize> = (0..k).filter(|&j| classes[j] == 0).collect();
            if !state.is_zero() {
                positive_phase(h, m, fs, &pos, &neg, state, exp, (lo, hi), out);
            }
        }
        let mut j = 0;
        loop {
            if j == k {
                return;
            }
            classes[j] += 1;
            if classes[j] < 3 {
                break;
            }
            classes[j] = 0;
            j += 1;
        }
    }
}

fn apply_mode_unchecked(h: &HSpace, m: &ModulePresentation, i: usize, n: i64, w: &WElem) -> WElem {
    let mut out = WElem::zero();
    for (key, c) in w.terms() {
        apply_mode_key(h, m, i, n, key, c, &mut out);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn positive_phase(
    h: &HSpace,
    m: &ModulePresentation,
    fs: &[(usize, u32)],
    pos: &[usize],
    neg: &[usize],
    state: WElem,
    exp: i64,
    range: (i64, i64),
    out: &mut BTreeMap<i64, WElem>,
) {
    let Some((&j, rest)) = pos.split_first() else {
        creation_phase(fs, neg, &state, exp, range, out);
        return;
    };
    let (i, mj) = fs[j];
    let mut modes: Vec<u32> = state
        .terms()
        .flat_map(|((word, _), _)| word.factors().iter())
        .filter(|&&(b, _)| !h.form(i, b).is_zero())
        .map(|&(_, n)| n)
        .collect();
    modes.sort_unstable();
    modes.dedup();
    for n in modes {
        let n = n as i64;
        let mut next = WElem::zero();
        let coeff = binom_q(-n - 1, mj - 1);
        for (key, c) in state.terms() {
            apply_mode_key(h, m, i, n, key, &mul(c, &coeff), &mut next);
        }
        if !next.is_zero() {
            positive_phase(h, m, fs, rest, neg, next, exp - n - mj as i64, range, out);
        }
    }
}

/// Creation modes `a_j(-s_j)`, `s_j >= m_j`, contribute `x^{s_j - m_j}`.
fn creation_phase(
    fs: &[(usize, u32)],
    neg: &[usize],
    state: &WElem,
    exp: i64,
    (lo, hi): (i64, i64),
    out: &mut BTreeMap<i64, WElem>,
) {
    if exp > hi {
        return;
    }
    let mut extra = vec![0u32; neg.len()];
    loop {
        let total: i64 = extra.iter().map(|&t| t as i64).sum();
        let e = exp + total;
        if e >= lo {
            let mut prefix = Vec::with_capacity(neg.len());
            let mut coeff = Scalar::one();
            for (p, &j) in neg.iter().enumerate() {
                let (i, mj) = fs[j];
                let s = mj + extra[p];
                prefix.push((i, s));
                coeff = mul(&coeff, &binom_q(s as i64 - 1, mj - 1));
            }
            let slot = out.entry(e).or_default();
            for ((word, s), c) in state.terms() {
                let mut f = prefix.clone();
                f.extend_from_slice(word.factors());
                slot.add_term((NegWord(f), *s), mul(c, &coeff));
            }
        }
        // next composition with total <= hi - exp
        let mut p = 0;
        loop {
            if p == neg.len() {
                return;
            }
            extra[p] += 1;
            let total: i64 = extra.iter().map(|&t| t as i64).sum();
            if exp + total <= hi {
                break;
            }
            extra[p] = 0;
            p += 1;
        }
    }
}

/// `u_{(e)} w` for every `e` in `[lo, hi]`, keyed by `e`.
pub fn coefficient_range(
    h: &HSpace,
    m: &ModulePresentation,
    u: &FreeElem,
    w: &WElem,
    lo: i64,
    hi: i64,
) -> Result<BTreeMap<i64, WElem>> {
    check_indices(h, u)?;
    for (k, _) in w.terms() {
        m.check_index(k.1)?;
    }
    let mut out: BTreeMap<i64, WElem> = (lo..=hi).map(|e| (e, WElem::zero())).collect();
    for (word, c) in u.terms() {
        word_series(h, m, word, c, w, (lo, hi), &mut out);
    }
    Ok(out)
}

/// `u_s w`, the coefficient of `x^{-s-1}` in `Y(u, x) w`.
pub fn vertex_coefficient(
    h: &HSpace,
    m: &ModulePresentation,
    u: &FreeElem,
    s: i64,
    w: &WElem,
) -> Result<WElem> {
    let e = -s - 1;
    Ok(coefficient_range(h, m, u, w, e, e)?.remove(&e).unwrap_or_default())
}

/// Coefficients of `Y(u, x) w` for `x`-exponents in `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSeries {
    pub coeffs: BTreeMap<i64, WElem>,
    /// Every coefficient of `x^e` with `e` below this bound vanishes.
    pub exact_lower_bound: i64,
}

/// Smallest `x`-exponent that can carry a nonzero coefficient.
pub fn lower_exponent_bound(u: &FreeElem, w: &WElem) -> i64 {
    -(u.max_weight() as i64 + w.max_word_weight() as i64)
}

pub fn vertex_series(
    h: &HSpace,
    m: &ModulePresentation,
    u: &FreeElem,
    w: &WElem,
    lo: i64,
    hi: i64,
) -> Result<VertexSeries> {
    vertex_series_with(&Standard, h, m, u, w, lo, hi)
}

pub fn vertex_series_with(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    u: &FreeElem,
    w: &WElem,
    lo: i64,
    hi: i64,
) -> Result<VertexSeries> {
    let bound = lower_exponent_bound(u, w);
    let mut coeffs: BTreeMap<i64, WElem> = (lo..bound.min(hi + 1)).map(|e| (e, WElem::zero())).collect();
    if bound.max(lo) <= hi {
        coeffs.extend(vo.series(h, m, u, w, bound.max(lo), hi)?);
    }
    Ok(VertexSeries {
        coeffs,
        exact_lower_bound: bound,
    })
}

/// Truncated series of a matrix coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BruteForce {
    pub poly: LaurentPoly,
    /// False when no exponent in the window can reach the dual's weights.
    pub admissible: bool,
}

/// Variable names `z1..zn`.
pub fn product_vars(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("z{i}")).collect()
}

struct Stage {
    /// homogeneous parts `(weight, part)`
    parts: Vec<(i64, FreeElem)>,
    lo: i64,
    hi: i64,
}

fn stages(us: &[FreeElem], vars: &[String], window: &Window) -> Result<Vec<Stage>> {
    us.iter()
        .zip(vars)
        .map(|(u, v)| {
            let &(lo, hi) = window
                .get(v)
                .ok_or_else(|| Error::WindowMissingVariable(v.clone()))?;
            if lo > hi {
                return Err(Error::InvalidWindow {
                    var: v.clone(),
                    lo,
                    hi,
                });
            }
            Ok(Stage {
                parts: u
                    .homogeneous_components()
                    .into_iter()
                    .map(|(k, p)| (k as i64, p))
                    .collect(),
                lo,
                hi,
            })
        })
        .collect()
}

/// Weight ranges `[min, max]` added by stages `0..j` (the outer ones).
fn outer_ranges(st: &[Stage]) -> Vec<(i64, i64)> {
    let mut acc = vec![(0i64, 0i64)];
    for s in st {
        let (a, b) = *acc.last().unwrap();
        let wmin = s.parts.iter().map(|p| p.0).min().unwrap_or(0);
        let wmax = s.parts.iter().map(|p| p.0).max().unwrap_or(0);
        acc.push((a + wmin + s.lo, b + wmax + s.hi));
    }
    acc
}

fn reaches(targets: &[u32], c: i64, range: (i64, i64)) -> bool {
    targets
        .iter()
        .any(|&t| (c + range.0..=c + range.1).contains(&(t as i64)))
}

/// `<f, Y(u_1, z_1) ... Y(u_n, z_n) w>` expanded in `|z_1| > ... > |z_n|`,
/// restricted to the window, computed by nested coefficient extraction.
pub fn product_series_bruteforce(
    h: &HSpace,
    m: &ModulePresentation,
    us: &[FreeElem],
    w: &WElem,
    f: &DualFunctional,
    window: &Window,
) -> Result<BruteForce> {
    product_series_bruteforce_with(&Standard, h, m, us, w, f, window)
}

pub fn product_series_bruteforce_with(
    vo: &dyn VertexOperator,
    h: &HSpace,
    m: &ModulePresentation,
    us: &[FreeElem],
    w: &WElem,
    f: &DualFunctional,
    window: &Window,
) -> Result<BruteForce> {
    let vars = product_vars(us.len());
    let st = stages(us, &vars, window)?;
    let ranges = outer_ranges(&st);
    let targets = f.word_weights();
    let n = us.len();

    // split w by word weight
    let mut init: BTreeMap<i64, WElem> = BTreeMap::new();
    for (k, c) in w.terms() {
        init.entry(k.0.weight() as i64)
            .or_default()
            .add_term(k.clone(), c.clone());
    }
    let admissible = init.keys().any(|&c| reaches(&targets, c, ranges[n]));

    // state: exponents of the inner variables already applied, word weight, element
    let mut state: Vec<(Vec<i64>, i64, WElem)> = init
        .into_iter()
        .filter(|(c, _)| reaches(&targets, *c, ranges[n]))
        .map(|(c, e)| (Vec::new(), c, e))
        .collect();
    for j in (0..n).rev() {
        let s = &st[j];
        let mut next = Vec::new();
        for (exps, c, elem) in &state {
            for (wt, part) in &s.parts {
                let lo = s.lo.max(-(wt + c));
                let useful: Vec<i64> = (lo..=s.hi)
                    .filter(|&e| reaches(&targets, c + wt + e, ranges[j]))
                    .collect();
                let (Some(&first), Some(&last)) = (useful.first(), useful.last()) else {
                    continue;
                };
                let mut ser = vo.series(h, m, part, elem, first, last)?;
                for e in useful {
                    let c2 = c + wt + e;
                    let v = ser.remove(&e).unwrap_or_default();
                    if v.is_zero() {
                        continue;
                    }
                    let mut ex = vec![e];
                    ex.extend_from_slice(exps);
                    next.push((ex, c2, v));
                }
            }
        }
        state = next;
    }
    let names: Vec<&str> = vars.iter().map(String::as_str).collect();
    let mut poly = LaurentPoly::from_terms(&names, std::iter::empty());
    for (exps, _, elem) in state {
        let p = pairing(f, &elem);
        if !p.is_zero() {
            poly = poly.add(&LaurentPoly::from_terms(&names, [(exps.as_slice(), p)]));
        }
    }
    Ok(BruteForce { poly, admissible })
}

/// `<f, Y(Y(u_1, x_0) u_2, x_2) w>` expanded in `|x_2| > |x_0|`, restricted
/// to the window over `x0` and `x2`. The inner operator acts on `T(h_-)`.
pub fn iterate_series_bruteforce(
    h: &HSpace,
    m: &ModulePresentation,
    u1: &FreeElem,
    u2: &FreeElem,
    w: &WElem,
    f: &DualFunctional,
    window: &Window,
) -> Result<BruteForce> {
    let get = |v: &str| -> Result<(i64, i64)> {
        window
            .get(v)
            .copied()
            .ok_or_else(|| Error::WindowMissingVariable(v.into()))
    };
    let (lo0, hi0) = get("x0")?;
    let (lo2, hi2) = get("x2")?;
    let vac = ModulePresentation::trivial(h.dim());
    let u2w = WElem::from_terms(u2.terms().map(|(k, c)| ((k.clone(), 0), c.clone())));
    let mut poly = LaurentPoly::from_terms(&["x0", "x2"], std::iter::empty());
    let mut admissible = false;
    let targets = f.word_weights();
    let wmax = w.max_word_weight() as i64;
    let wmin = w.min_word_weight() as i64;
    let bound0 = -(u1.max_weight() as i64 + u2.max_weight() as i64);
    let inner_series = if lo0.max(bound0) <= hi0 {
        Standard.series(h, &vac, u1, &u2w, lo0.max(bound0), hi0)?
    } else {
        BTreeMap::new()
    };
    for (e0, inner) in inner_series {
        let mut v = FreeElem::zero();
        for ((word, _), c) in inner.terms() {
            v.add_term(word.clone(), c.clone());
        }
        if v.is_zero() {
            continue;
        }
        let vmin = v.terms().map(|(k, _)| k.weight() as i64).min().unwrap();
        let vmax = v.max_weight() as i64;
        if reaches(&targets, 0, (wmin + vmin + lo2, wmax + vmax + hi2)) {
            admissible = true;
        }
        let lo = lo2.max(lower_exponent_bound(&v, w));
        let useful: Vec<i64> = (lo..=hi2)
            .filter(|&e2| reaches(&targets, 0, (wmin + vmin + e2, wmax + vmax + e2)))
            .collect();
        let (Some(&first), Some(&last)) = (useful.first(), useful.last()) else {
            continue;
        };
        let mut outer = Standard.series(h, m, &v, w, first, last)?;
        for e2 in useful {
            let x = outer.remove(&e2).unwrap_or_default();
            let p = pairing(f, &x);
            if !p.is_zero() {
                poly = poly.add(&LaurentPoly::from_terms(&["x0", "x2"], [([e0, e2].as_slice(), p)]));
            }
        }
    }
    Ok(BruteForce { poly, admissible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halgebra::words_up_to;
    use crate::module::{apply_d, zero_matrix, Matrix};
    use crate::ratfun::window;
    use crate::scalar::int;

    fn w(f: &[(usize, u32)]) -> NegWord {
        NegWord::new(f.to_vec())
    }

    fn fe(f: &[(usize, u32)]) -> FreeElem {
        FreeElem::word(w(f))
    }

    /// `(1/(m-1)!) d^{m-1}/dx^{m-1} x^{-n-1}` evaluated as a coefficient of
    /// `x^{-n-m}`, by repeated differentiation.
    fn derivative_oracle(m: u32, n: i64) -> Scalar {
        let mut c = Scalar::one();
        let mut e = -n - 1;
        let mut fact = Scalar::one();
        for k in 1..m {
            c *= int(e);
            e -= 1;
            fact *= int(k as i64);
        }
        c / fact
    }

    /// Mode tuples `(n_1..n_k)` of a word with `sum n_j = total`, with their
    /// field coefficients. Positive parts are capped at `pos_budget` in total.
    fn mode_tuples(
        m: &ModulePresentation,
        word: &NegWord,
        total: i64,
        pos_budget: i64,
    ) -> Vec<(Vec<i64>, Scalar)> {
        let fs = word.factors();
        let k = fs.len();
        let mut out = Vec::new();
        // sign class per factor: 0 negative, 1 positive, 2 zero
        let mut classes = vec![0u8; k];
        loop {
            let usable = (0..k).all(|j| classes[j] != 2 || !m.rho_is_zero(fs[j].0));
            if usable {
                let neg: Vec<usize> = (0..k).filter(|&j| classes[j] == 0).collect();
                let pos: Vec<usize> = (0..k).filter(|&j| classes[j] == 1).collect();
                let mut modes = vec![0i64; k];
                enumerate_positive(&pos, 0, pos_budget, &mut modes, &mut |modes| {
                    let psum: i64 = pos.iter().map(|&j| modes[j]).sum();
                    let nsum = total - psum;
                    // negative mode n_j needs -n_j >= m_j for a nonzero coefficient
                    let need: i64 = neg.iter().map(|&j| fs[j].1 as i64).sum();
                    if neg.is_empty() {
                        if nsum == 0 {
                            out.push((modes.clone(), tuple_coeff(fs, modes)));
                        }
                        return;
                    }
                    if -nsum < need {
                        return;
                    }
                    let mut mm = modes.clone();
                    distribute_negative(fs, &neg, 0, -nsum, &mut mm, &mut |t| {
                        out.push((t.to_vec(), tuple_coeff(fs, t)));
                    });
                });
            }
            // next class assignment
            let mut j = 0;
            loop {
                if j == k {
                    return out;
                }
                classes[j] += 1;
                if classes[j] < 3 {
                    break;
                }
                classes[j] = 0;
                j += 1;
            }
        }
    }

    fn tuple_coeff(fs: &[(usize, u32)], modes: &[i64]) -> Scalar {
        let mut c = Scalar::one();
        for (j, &(_, mj)) in fs.iter().enumerate() {
            c *= field_coefficient(mj, modes[j]);
        }
        c
    }

    fn enumerate_positive(
        pos: &[usize],
        at: usize,
        budget: i64,
        modes: &mut Vec<i64>,
        f: &mut dyn FnMut(&Vec<i64>),
    ) {
        if at == pos.len() {
            f(modes);
            return;
        }
        let remaining = (pos.len() - at - 1) as i64;
        for n in 1..=budget - remaining {
            modes[pos[at]] = n;
            enumerate_positive(pos, at + 1, budget - n, modes, f);
        }
        modes[pos[at]] = 0;
    }

    fn distribute_negative(
        fs: &[(usize, u32)],
        neg: &[usize],
        at: usize,
        rest: i64,
        modes: &mut Vec<i64>,
        f: &mut dyn FnMut(&[i64]),
    ) {
        let j = neg[at];
        if at + 1 == neg.len() {
            if rest >= fs[j].1 as i64 {
                modes[j] = -rest;
                f(modes);
            }
            return;
        }
        let later: i64 = neg[at + 1..].iter().map(|&q| fs[q].1 as i64).sum();
        for s in fs[j].1 as i64..=rest - later {
            modes[j] = -s;
            distribute_negative(fs, neg, at + 1, rest - s, modes, f);
        }
    }

    /// Mode-by-mode oracle: every mode tuple is normal ordered and applied.
        fn tuple_coefficient(
        h: &HSpace,
        m: &ModulePresentation,
        u: &FreeElem,
        s: i64,
        w: &WElem,
    ) -> Result<WElem> {
        for (word, _) in u.terms() {
            for &(i, _) in word.factors() {
                h.check_index(i)?;
            }
        }
        let budget = w.max_word_weight() as i64;
        let mut out = WElem::zero();
        for (word, c) in u.terms() {
            let total = s + 1 - word.weight() as i64;
            for (modes, k) in mode_tuples(m, word, total, budget) {
                let mono = ModeMonomial {
                    modes: word
                        .factors()
                        .iter()
                        .zip(&modes)
                        .map(|(&(i, _), &n)| (i, n))
                        .collect(),
                    coeff: c * k,
                };
                let ordered = normal_order_monomial(&mono);
                out.add_assign(&apply_monomial(h, m, &ordered, w)?);
            }
        }
        Ok(out)
    }

    #[test]
    fn phased_engine_matches_mode_tuples() {
        let h = HSpace::new(vec![vec![int(1), int(2)], vec![int(-1), int(3)]]).unwrap();
        let rho: Vec<Matrix> = vec![
            vec![vec![int(0), int(1)], vec![int(0), int(2)]],
            vec![vec![int(1), int(0)], vec![int(-1), int(0)]],
        ];
        let m = ModulePresentation::new(vec![int(0), int(0)], rho, zero_matrix(2)).unwrap();
        let words = words_up_to(2, 3);
        for a in &words {
            let u = FreeElem::word(a.clone());
            for b in words.iter().filter(|b| b.weight() <= 2) {
                for idx in 0..2 {
                    let x = WElem::basis(b.clone(), idx);
                    let fast = coefficient_range(&h, &m, &u, &x, -6, 3).unwrap();
                    for (e, got) in fast {
                        let want = tuple_coefficient(&h, &m, &u, -e - 1, &x).unwrap();
                        assert_eq!(got, want, "u={a:?} w={b:?}/{idx} e={e}");
                    }
                }
            }
        }
    }

    #[test]
    fn field_coefficients() {
        for n in -6..6 {
            assert_eq!(field_coefficient(1, n), Scalar::one());
            for m in 1..5 {
                assert_eq!(field_coefficient(m, n), derivative_oracle(m, n));
            }
        }
        assert_eq!(field_coefficient(2, -3), int(2));
        assert_eq!(field_coefficient(2, 1), int(-2));
    }

    #[test]
    fn normal_ordering_examples() {
        let r = normal_order_monomial(&ModeMonomial::new(vec![(0, 2), (1, -1)]));
        assert_eq!(r.modes, vec![(1, -1), (0, 2)]);
        let r = normal_order_monomial(&ModeMonomial::new(vec![(0, -1), (1, -2)]));
        assert_eq!(r.modes, vec![(0, -1), (1, -2)]);
        let r = normal_order_monomial(&ModeMonomial::new(vec![(0, 1), (1, 0), (2, -1), (3, 1)]));
        assert_eq!(r.modes, vec![(2, -1), (0, 1), (3, 1), (1, 0)]);
    }

    #[test]
    fn normal_ordering_split_is_in_j() {
        let mono = ModeMonomial::new(vec![(0, 1), (1, 0), (2, -1), (3, 1), (0, -2)]);
        let s = normal_ordering_split(&mono);
        assert!(s.is_valid());
        assert!(ordered_splits(s.k, s.alpha, s.beta).contains(&s));
        // |J(k; a, b)| is a multinomial coefficient
        assert_eq!(ordered_splits(5, 2, 3).len(), 30);
        assert!(ordered_splits(4, 1, 3).iter().all(OrderedSplit::is_valid));
    }

    #[test]
    fn vacuum_is_identity() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        let x = WElem::basis(w(&[(0, 1), (1, 2)]), 0);
        let s = vertex_series(&h, &m, &FreeElem::vacuum(), &x, -5, 5).unwrap();
        for (e, c) in s.coeffs {
            if e == 0 {
                assert_eq!(c, x);
            } else {
                assert!(c.is_zero());
            }
        }
    }

    #[test]
    fn creation_limit() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        let u = fe(&[(0, 1)]);
        let c = vertex_coefficient(&h, &m, &u, -1, &WElem::vacuum(0)).unwrap();
        assert_eq!(c, WElem::basis(w(&[(0, 1)]), 0));
    }

    #[test]
    fn single_contraction() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        let u = fe(&[(0, 1)]);
        let x = WElem::basis(w(&[(0, 1)]), 0);
        // coefficient of x^{-2} is u_1
        assert_eq!(vertex_coefficient(&h, &m, &u, 1, &x).unwrap(), WElem::vacuum(0));
        let s = vertex_series(&h, &m, &u, &x, -2, 0).unwrap();
        assert_eq!(s.coeffs[&-2], WElem::vacuum(0));
        assert!(s.coeffs[&-1].is_zero());
        assert_eq!(s.coeffs[&0], WElem::basis(w(&[(0, 1), (0, 1)]), 0));
        assert_eq!(s.exact_lower_bound, -2);
    }

    #[test]
    fn derivative_field_on_vacuum() {
        // Y(a(-2)1, x) 1 = sum_{s >= 2} (s - 1) a(-s) 1 x^{s-2}
        let h = HSpace::identity(1);
        let m = ModulePresentation::trivial(1);
        let u = fe(&[(0, 2)]);
        let s = vertex_series(&h, &m, &u, &WElem::vacuum(0), -1, 2).unwrap();
        assert!(s.coeffs[&-1].is_zero());
        for e in 0..=2i64 {
            let expect = WElem::basis(w(&[(0, (e + 2) as u32)]), 0).scale(&int(e + 1));
            assert_eq!(s.coeffs[&e], expect);
        }
    }

    #[test]
    fn finite_lower_truncation() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        for u in words_up_to(2, 3) {
            for x in words_up_to(2, 2) {
                let u = FreeElem::word(u.clone());
                let x = WElem::basis(x, 0);
                let b = lower_exponent_bound(&u, &x);
                for e in b - 4..b {
                    assert!(vertex_coefficient(&h, &m, &u, -e - 1, &x).unwrap().is_zero());
                }
                // weight of u_s w is wt(u) + wt(w) - s - 1
                for e in b..b + 3 {
                    let c = vertex_coefficient(&h, &m, &u, -e - 1, &x).unwrap();
                    let want = int(u.weight().unwrap() as i64 + x.max_word_weight() as i64 + e);
                    assert_eq!(apply_d(&m, &c), c.scale(&want));
                }
            }
        }
    }

    #[test]
    fn zero_modes_use_module_action() {
        let h = HSpace::identity(2);
        let one = |x: i64| -> Matrix { vec![vec![int(x)]] };
        let m = ModulePresentation::new(vec![int(0)], vec![one(3), one(5)], zero_matrix(1)).unwrap();
        // Y(a1(-1)a2(-1)1, x) on 1 (x) e: the x^{-2} coefficient is a1(0)a2(0) = 15
        let u = fe(&[(0, 1), (1, 1)]);
        let c = vertex_coefficient(&h, &m, &u, 1, &WElem::vacuum(0)).unwrap();
        assert_eq!(c, WElem::vacuum(0).scale(&int(15)));
    }

    #[test]
    fn two_point_series() {
        let h = HSpace::identity(1);
        let m = ModulePresentation::trivial(1);
        let u = fe(&[(0, 1)]);
        let f = DualFunctional::basis(NegWord::vacuum(), 0);
        let b = product_series_bruteforce(
            &h,
            &m,
            &[u.clone(), u],
            &WElem::vacuum(0),
            &f,
            &window(&[("z1", -6, 4), ("z2", -6, 4)]),
        )
        .unwrap();
        assert!(b.admissible);
        // (z1 - z2)^{-2} = sum_j (j + 1) z1^{-2-j} z2^j
        let mut expect = LaurentPoly::zero();
        for j in 0..=4i64 {
            expect = expect.add(&LaurentPoly::monomial(&[("z1", -2 - j), ("z2", j)], int(j + 1)));
        }
        assert_eq!(b.poly, expect);
    }

    #[test]
    fn vacuum_product_is_constant() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        let x = WElem::basis(w(&[(1, 2)]), 0);
        let f = DualFunctional::basis(w(&[(1, 2)]), 0);
        let b = product_series_bruteforce(
            &h,
            &m,
            &[FreeElem::vacuum(), FreeElem::vacuum()],
            &x,
            &f,
            &window(&[("z1", -3, 3), ("z2", -3, 3)]),
        )
        .unwrap();
        assert_eq!(b.poly, LaurentPoly::one());
    }

    #[test]
    fn order_of_creation_matters() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        let f = DualFunctional::basis(w(&[(0, 1), (1, 1)]), 0);
        let win = window(&[("z1", -4, 4), ("z2", -4, 4)]);
        let a = product_series_bruteforce(&h, &m, &[fe(&[(0, 1)]), fe(&[(1, 1)])], &WElem::vacuum(0), &f, &win)
            .unwrap();
        let b = product_series_bruteforce(&h, &m, &[fe(&[(1, 1)]), fe(&[(0, 1)])], &WElem::vacuum(0), &f, &win)
            .unwrap();
        assert_eq!(a.poly, LaurentPoly::one());
        assert!(b.poly.is_zero());
    }

    #[test]
    fn inadmissible_window_is_flagged() {
        let h = HSpace::identity(1);
        let m = ModulePresentation::trivial(1);
        let f = DualFunctional::basis(w(&[(0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1)]), 0);
        let b = product_series_bruteforce(
            &h,
            &m,
            &[fe(&[(0, 1)])],
            &WElem::vacuum(0),
            &f,
            &window(&[("z1", -2, 0)]),
        )
        .unwrap();
        assert!(!b.admissible);
        assert!(b.poly.is_zero());
    }
}
