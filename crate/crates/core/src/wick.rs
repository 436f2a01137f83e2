//! Closed-form reduction of products and iterates of vertex operators by
//! contracting positive parts of earlier fields against negative parts of
//! later ones.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::halgebra::{FreeElem, HSpace, NegWord};
use crate::module::{apply_mode_key, pairing, DualFunctional, Key, ModulePresentation, WElem};
use crate::ratfun::{
    classify_linear_form, iterate_substitution_inverse, LaurentPoly, LinearForm, PoleFactor,
    RatFun,
};
use crate::scalar::{binom_q, int, Scalar};

/// Where a field is evaluated.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldPoint {
    Var(String),
    /// `base + offset`
    Shifted { base: String, offset: String },
}

impl FieldPoint {
    pub fn var(name: &str) -> Self {
        FieldPoint::Var(name.into())
    }

    fn form(&self) -> LinearForm {
        match self {
            FieldPoint::Var(v) => [(v.clone(), 1)].into_iter().collect(),
            FieldPoint::Shifted { base, offset } => {
                [(base.clone(), 1), (offset.clone(), 1)].into_iter().collect()
            }
        }
    }

    /// Variable name used for this point in Laurent polynomials.
    fn label(&self) -> String {
        match self {
            FieldPoint::Var(v) => v.clone(),
            FieldPoint::Shifted { base, offset } => format!("{base}+{offset}"),
        }
    }
}

/// `(1/(order-1)!) d^{order-1} a_index` evaluated at `point`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactorSpec {
    pub index: usize,
    pub order: u32,
    pub point: FieldPoint,
}

/// The normal-ordered product attached to one word at one point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub point: FieldPoint,
    pub factors: Vec<(usize, u32)>,
}

impl Block {
    pub fn from_word(word: &NegWord, point: FieldPoint) -> Self {
        Block {
            point,
            factors: word.factors().to_vec(),
        }
    }

    pub fn specs(&self) -> Vec<FactorSpec> {
        self.factors
            .iter()
            .map(|&(index, order)| FactorSpec {
                index,
                order,
                point: self.point.clone(),
            })
            .collect()
    }
}

/// `scalar * prod(pole^{-k}) * :residual:`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractionTerm {
    pub scalar: Scalar,
    pub poles: BTreeMap<PoleFactor, u32>,
    pub residual: Vec<FactorSpec>,
}

/// Which index patterns enter the two-block contraction sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PairingRule {
    /// Every partial injective matching between left and right factors.
    #[default]
    AllMatchings,
    /// Only `p_1 > ... > p_i` paired with `q_1 < ... < q_i`.
    OrderedOnly,
}

/// Left positions `p` (strictly decreasing) paired with right positions `q`;
/// 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairingPattern {
    pub p: Vec<usize>,
    pub q: Vec<usize>,
}

pub fn enumerate_patterns(k: usize, l: usize, rule: PairingRule) -> Vec<PairingPattern> {
    fn decreasing(k: usize, size: usize, below: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for p in (0..below.min(k)).rev() {
            cur.push(p);
            decreasing(k, size, p, cur, out);
            cur.pop();
        }
    }
    fn injective(l: usize, size: usize, ordered: bool, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        let start = if ordered { cur.last().map_or(0, |q| q + 1) } else { 0 };
        for q in start..l {
            if !ordered && cur.contains(&q) {
                continue;
            }
            cur.push(q);
            injective(l, size, ordered, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for size in 0..=k.min(l) {
        let mut ps = Vec::new();
        decreasing(k, size, k, &mut Vec::new(), &mut ps);
        let mut qs = Vec::new();
        injective(l, size, rule == PairingRule::OrderedOnly, &mut Vec::new(), &mut qs);
        for p in &ps {
            for q in &qs {
                out.push(PairingPattern {
                    p: p.clone(),
                    q: q.clone(),
                });
            }
        }
    }
    out
}

/// `[a^+ of order m at x1, b^- of order n at x2] = scalar * (x1 - x2)^{-exponent}`.
pub fn commutator_pm(h: &HSpace, a: usize, m: u32, b: usize, n: u32) -> (Scalar, u32) {
    let s = int(n as i64) * h.form(a, b) * binom_q(-(n as i64) - 1, m - 1);
    (s, m + n)
}

fn pole_between(left: &FieldPoint, right: &FieldPoint) -> Result<(PoleFactor, i64)> {
    let mut f = left.form();
    for (v, c) in right.form() {
        *f.entry(v).or_insert(0) -= c;
    }
    classify_linear_form(&f)
}

fn distinct_points(left: &[FactorSpec], right: &[FactorSpec]) -> Result<()> {
    for a in left {
        for b in right {
            if a.point == b.point {
                return Err(Error::RepeatedPoint(a.point.label()));
            }
        }
    }
    Ok(())
}

/// Expansion of `:left: :right:` as a sum of normal-ordered products.
pub fn contract_two_blocks(
    h: &HSpace,
    left: &[FactorSpec],
    right: &[FactorSpec],
    rule: PairingRule,
) -> Result<Vec<ContractionTerm>> {
    distinct_points(left, right)?;
    let mut out = Vec::new();
    'patterns: for pat in enumerate_patterns(left.len(), right.len(), rule) {
        let mut scalar = Scalar::one();
        let mut poles: BTreeMap<PoleFactor, u32> = BTreeMap::new();
        for (&p, &q) in pat.p.iter().zip(&pat.q) {
            let (a, b) = (&left[p], &right[q]);
            let (s, e) = commutator_pm(h, a.index, a.order, b.index, b.order);
            if s.is_zero() {
                continue 'patterns;
            }
            let (f, c) = pole_between(&a.point, &b.point)?;
            // (c F)^{-e} = c^{-e} F^{-e}
            let mut s = s;
            for _ in 0..e {
                s /= int(c);
            }
            scalar *= s;
            *poles.entry(f).or_insert(0) += e;
        }
        let mut residual: Vec<FactorSpec> = left
            .iter()
            .enumerate()
            .filter(|(i, _)| !pat.p.contains(i))
            .map(|(_, f)| f.clone())
            .collect();
        residual.extend(
            right
                .iter()
                .enumerate()
                .filter(|(i, _)| !pat.q.contains(i))
                .map(|(_, f)| f.clone()),
        );
        out.push(ContractionTerm {
            scalar,
            poles,
            residual,
        });
    }
    Ok(out)
}

fn merge_terms(terms: Vec<ContractionTerm>) -> Vec<ContractionTerm> {
    let mut acc: BTreeMap<(Vec<(PoleFactor, u32)>, Vec<FactorSpec>), Scalar> = BTreeMap::new();
    for t in terms {
        let key = (t.poles.into_iter().collect(), t.residual);
        *acc.entry(key).or_insert_with(Scalar::zero) += t.scalar;
    }
    acc.into_iter()
        .filter(|(_, s)| !s.is_zero())
        .map(|((poles, residual), scalar)| ContractionTerm {
            scalar,
            poles: poles.into_iter().collect(),
            residual,
        })
        .collect()
}

fn combine(outer: &ContractionTerm, inner: ContractionTerm) -> ContractionTerm {
    let mut poles = outer.poles.clone();
    for (f, k) in inner.poles {
        *poles.entry(f).or_insert(0) += k;
    }
    ContractionTerm {
        scalar: &outer.scalar * inner.scalar,
        poles,
        residual: inner.residual,
    }
}

/// Expansion of `:B_1: ... :B_n:`, merging blocks left to right.
pub fn reduce_blocks(h: &HSpace, blocks: &[Block], rule: PairingRule) -> Result<Vec<ContractionTerm>> {
    let mut terms = vec![ContractionTerm {
        scalar: Scalar::one(),
        poles: BTreeMap::new(),
        residual: Vec::new(),
    }];
    for b in blocks {
        let right = b.specs();
        let mut next = Vec::new();
        for t in &terms {
            for c in contract_two_blocks(h, &t.residual, &right, rule)? {
                next.push(combine(t, c));
            }
        }
        terms = merge_terms(next);
    }
    Ok(terms)
}

/// Same expansion, merging blocks right to left.
pub fn reduce_blocks_right(
    h: &HSpace,
    blocks: &[Block],
    rule: PairingRule,
) -> Result<Vec<ContractionTerm>> {
    let mut terms = vec![ContractionTerm {
        scalar: Scalar::one(),
        poles: BTreeMap::new(),
        residual: Vec::new(),
    }];
    for b in blocks.iter().rev() {
        let left = b.specs();
        let mut next = Vec::new();
        for t in &terms {
            for c in contract_two_blocks(h, &left, &t.residual, rule)? {
                next.push(combine(t, c));
            }
        }
        terms = merge_terms(next);
    }
    Ok(terms)
}

type Mono = (Key, Vec<i64>);

struct Action<'a> {
    h: &'a HSpace,
    m: &'a ModulePresentation,
    factors: Vec<(usize, u32, usize)>,
    max_weight: u32,
    out: BTreeMap<Mono, Scalar>,
}

fn add_into(map: &mut BTreeMap<Mono, Scalar>, k: Mono, c: Scalar) {
    if c.is_zero() {
        return;
    }
    use std::collections::btree_map::Entry;
    match map.entry(k) {
        Entry::Vacant(e) => {
            e.insert(c);
        }
        Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            if e.get().is_zero() {
                e.remove();
            }
        }
    }
}

impl Action<'_> {
    /// Applies `a_i(n)` times `coeff * var^exp` to every entry.
    fn step(
        &self,
        state: &BTreeMap<Mono, Scalar>,
        i: usize,
        n: i64,
        var: usize,
        coeff: &Scalar,
        exp: i64,
    ) -> BTreeMap<Mono, Scalar> {
        let mut out = BTreeMap::new();
        for ((key, exps), c) in state {
            let mut tmp = WElem::zero();
            apply_mode_key(self.h, self.m, i, n, key, &(c * coeff), &mut tmp);
            for (k2, c2) in tmp.terms() {
                let mut e = exps.clone();
                e[var] += exp;
                add_into(&mut out, (k2.clone(), e), c2.clone());
            }
        }
        out
    }

    fn max_word_weight(state: &BTreeMap<Mono, Scalar>) -> u32 {
        state.keys().map(|(k, _)| k.0.weight()).max().unwrap_or(0)
    }

    /// Zero modes, rightmost factor first; `j` counts down.
    fn zero_phase(&mut self, j: usize, state: BTreeMap<Mono, Scalar>, rest: Vec<usize>) {
        if state.is_empty() {
            return;
        }
        if j == 0 {
            let mut rest = rest;
            rest.reverse();
            self.pos_phase(rest.len(), &rest, state, Vec::new());
            return;
        }
        let p = j - 1;
        let (i, m, var) = self.factors[p];
        let mut keep = rest.clone();
        keep.push(p);
        self.zero_phase(p, state.clone(), keep);
        if !self.m.rho_is_zero(i) {
            let c = if m % 2 == 1 { Scalar::one() } else { -Scalar::one() };
            let next = self.step(&state, i, 0, var, &c, -(m as i64));
            self.zero_phase(p, next, rest);
        }
    }

    /// Positive modes over the non-zero factors (`cand` in original order).
    fn pos_phase(&mut self, j: usize, cand: &[usize], state: BTreeMap<Mono, Scalar>, negs: Vec<usize>) {
        if state.is_empty() {
            return;
        }
        if j == 0 {
            let mut negs = negs;
            negs.reverse();
            self.neg_phase(negs.len(), &negs, state);
            return;
        }
        let p = cand[j - 1];
        let (i, m, var) = self.factors[p];
        let mut as_neg = negs.clone();
        as_neg.push(p);
        self.pos_phase(j - 1, cand, state.clone(), as_neg);
        for n in 1..=Self::max_word_weight(&state) as i64 {
            let c = binom_q(-n - 1, m - 1);
            let next = self.step(&state, i, n, var, &c, -n - m as i64);
            self.pos_phase(j - 1, cand, next, negs.clone());
        }
    }

    /// Creation modes, rightmost first, within the weight budget.
    fn neg_phase(&mut self, j: usize, negs: &[usize], state: BTreeMap<Mono, Scalar>) {
        if state.is_empty() {
            return;
        }
        if j == 0 {
            for (k, c) in state {
                add_into(&mut self.out, k, c);
            }
            return;
        }
        let p = negs[j - 1];
        let (i, m, var) = self.factors[p];
        let later: u32 = negs[..j - 1].iter().map(|&q| self.factors[q].1).sum();
        let cur = Self::max_word_weight(&state);
        let min_cur = state.keys().map(|(k, _)| k.0.weight()).min().unwrap_or(0);
        if min_cur + m + later > self.max_weight {
            return;
        }
        let top = self.max_weight - later - min_cur;
        for s in m..=top {
            let c = binom_q(s as i64 - 1, m - 1);
            let mut next = self.step(&state, i, -(s as i64), var, &c, s as i64 - m as i64);
            if cur + s + later > self.max_weight {
                next.retain(|(k, _), _| k.0.weight() + later <= self.max_weight);
            }
            self.neg_phase(j - 1, negs, next);
        }
    }
}

/// `:residual: w` as a map from basis vectors of word weight at most
/// `max_weight` to Laurent polynomials in the residual's points.
pub fn normal_ordered_action(
    h: &HSpace,
    m: &ModulePresentation,
    residual: &[FactorSpec],
    w: &WElem,
    max_weight: u32,
) -> BTreeMap<Key, LaurentPoly> {
    let mut labels: Vec<String> = residual.iter().map(|f| f.point.label()).collect();
    labels.sort_by(|a, b| crate::ratfun::cmp_vars(a, b));
    labels.dedup();
    let factors: Vec<(usize, u32, usize)> = residual
        .iter()
        .map(|f| {
            let v = labels.iter().position(|l| *l == f.point.label()).unwrap();
            (f.index, f.order, v)
        })
        .collect();
    let mut act = Action {
        h,
        m,
        factors,
        max_weight,
        out: BTreeMap::new(),
    };
    let mut start = BTreeMap::new();
    for (k, c) in w.terms() {
        add_into(&mut start, (k.clone(), vec![0; labels.len()]), c.clone());
    }
    act.zero_phase(residual.len(), start, Vec::new());

    let names: Vec<&str> = labels.iter().map(String::as_str).collect();
    let mut grouped: BTreeMap<Key, Vec<(Vec<i64>, Scalar)>> = BTreeMap::new();
    for ((k, e), c) in act.out {
        if k.0.weight() <= max_weight {
            grouped.entry(k).or_default().push((e, c));
        }
    }
    grouped
        .into_iter()
        .map(|(k, ts)| {
            let p = LaurentPoly::from_terms(&names, ts.iter().map(|(e, c)| (e.as_slice(), c.clone())));
            (k, p)
        })
        .collect()
}

/// `<f, :residual: w>`.
pub fn matrix_coeff_normal_ordered(
    h: &HSpace,
    m: &ModulePresentation,
    term: &ContractionTerm,
    f: &DualFunctional,
    w: &WElem,
) -> LaurentPoly {
    let top = f.keys().map(|k| k.0.weight()).max().unwrap_or(0);
    let mut out = LaurentPoly::zero();
    for (k, p) in normal_ordered_action(h, m, &term.residual, w, top) {
        let c = f.0.coeff(&k);
        if !c.is_zero() {
            out = out.add(&p.scale(&c));
        }
    }
    out
}

/// Per-key accumulation of `poles -> numerator` before forming rational
/// functions.
#[derive(Default)]
struct Accumulator {
    by_key: BTreeMap<Key, BTreeMap<Vec<(PoleFactor, u32)>, LaurentPoly>>,
}

impl Accumulator {
    fn add(&mut self, key: Key, poles: &BTreeMap<PoleFactor, u32>, p: LaurentPoly) {
        let slot = self
            .by_key
            .entry(key)
            .or_default()
            .entry(poles.iter().map(|(f, k)| (f.clone(), *k)).collect())
            .or_default();
        *slot = slot.add(&p);
    }

    fn finish(self) -> BTreeMap<Key, RatFun> {
        let mut out = BTreeMap::new();
        for (k, groups) in self.by_key {
            let mut r = RatFun::zero();
            for (poles, num) in groups {
                r = r.add(&RatFun::new(num, poles.into_iter().collect()));
            }
            if !r.is_zero() {
                out.insert(k, r);
            }
        }
        out
    }
}

fn word_tuples(us: &[FreeElem]) -> Vec<(Vec<NegWord>, Scalar)> {
    let mut acc: Vec<(Vec<NegWord>, Scalar)> = vec![(Vec::new(), Scalar::one())];
    for u in us {
        let mut next = Vec::new();
        for (ws, c) in &acc {
            for (w, d) in u.terms() {
                let mut ws = ws.clone();
                ws.push(w.clone());
                next.push((ws, c * d));
            }
        }
        acc = next;
    }
    acc
}

/// `Y(u_1, z_1) ... Y(u_n, z_n) w` as rational-function coefficients of all
/// basis vectors of word weight at most `max_weight`.
pub fn product_coefficients(
    h: &HSpace,
    m: &ModulePresentation,
    us: &[FreeElem],
    w: &WElem,
    max_weight: u32,
    rule: PairingRule,
) -> Result<BTreeMap<Key, RatFun>> {
    let vars = crate::fields::product_vars(us.len());
    let mut acc = Accumulator::default();
    for (words, c) in word_tuples(us) {
        let blocks: Vec<Block> = words
            .iter()
            .zip(&vars)
            .map(|(wd, v)| Block::from_word(wd, FieldPoint::var(v)))
            .collect();
        for t in reduce_blocks(h, &blocks, rule)? {
            let s = &c * &t.scalar;
            for (k, p) in normal_ordered_action(h, m, &t.residual, w, max_weight) {
                acc.add(k, &t.poles, p.scale(&s));
            }
        }
    }
    Ok(acc.finish())
}

fn pair_coefficients(f: &DualFunctional, coeffs: &BTreeMap<Key, RatFun>) -> RatFun {
    let mut r = RatFun::zero();
    for (k, c) in f.terms() {
        if let Some(x) = coeffs.get(k) {
            r = r.add(&x.scale(c));
        }
    }
    r
}

/// `<f, Y(u_1, z_1) ... Y(u_n, z_n) w>` as a rational function.
pub fn matrix_coeff_product(
    h: &HSpace,
    m: &ModulePresentation,
    us: &[FreeElem],
    f: &DualFunctional,
    w: &WElem,
) -> Result<RatFun> {
    matrix_coeff_product_with(h, m, us, f, w, PairingRule::AllMatchings)
}

pub fn matrix_coeff_product_with(
    h: &HSpace,
    m: &ModulePresentation,
    us: &[FreeElem],
    f: &DualFunctional,
    w: &WElem,
    rule: PairingRule,
) -> Result<RatFun> {
    let top = f.keys().map(|k| k.0.weight()).max().unwrap_or(0);
    Ok(pair_coefficients(f, &product_coefficients(h, m, us, w, top, rule)?))
}

/// Contraction expansion of `Y(Y(u_1, x_0) u_2, x_2)`: `u_1` factors sit at
/// `x2 + x0`, `u_2` factors at `x2`. Word coefficients are folded into the
/// scalars.
pub fn iterate_closed_form(
    h: &HSpace,
    u1: &FreeElem,
    u2: &FreeElem,
    rule: PairingRule,
) -> Result<Vec<ContractionTerm>> {
    let shifted = FieldPoint::Shifted {
        base: "x2".into(),
        offset: "x0".into(),
    };
    let base = FieldPoint::var("x2");
    let mut out = Vec::new();
    for (w1, c1) in u1.terms() {
        for (w2, c2) in u2.terms() {
            let l = Block::from_word(w1, shifted.clone()).specs();
            let r = Block::from_word(w2, base.clone()).specs();
            for mut t in contract_two_blocks(h, &l, &r, rule)? {
                t.scalar *= c1 * c2;
                out.push(t);
            }
        }
    }
    Ok(merge_terms(out))
}

/// Coefficients of the iterate as rational functions of `(x0, x2)`.
pub fn iterate_coefficients_x(
    h: &HSpace,
    m: &ModulePresentation,
    u1: &FreeElem,
    u2: &FreeElem,
    w: &WElem,
    max_weight: u32,
    rule: PairingRule,
) -> Result<BTreeMap<Key, RatFun>> {
    let y = "x2+x0";
    let sum = PoleFactor::sum("x0", "x2");
    let shifted_power = |k: i64| -> RatFun {
        if k >= 0 {
            RatFun::from_poly(LaurentPoly::var("x0").add(&LaurentPoly::var("x2")).pow(k as u32))
        } else {
            RatFun::pole(sum.clone(), (-k) as u32)
        }
    };
    let mut out: BTreeMap<Key, RatFun> = BTreeMap::new();
    for t in iterate_closed_form(h, u1, u2, rule)? {
        let prefactor = RatFun::new(LaurentPoly::constant(t.scalar.clone()), t.poles.clone());
        for (k, p) in normal_ordered_action(h, m, &t.residual, w, max_weight) {
            // group by the power of the shifted point
            let mut by_y: BTreeMap<i64, LaurentPoly> = BTreeMap::new();
            for (e, c) in p.terms() {
                let ky = p.exponent(e, y);
                let k2 = p.exponent(e, "x2");
                let slot = by_y.entry(ky).or_default();
                *slot = slot.add(&LaurentPoly::monomial(&[("x2", k2)], c.clone()));
            }
            let mut r = RatFun::zero();
            for (ky, rest) in by_y {
                r = r.add(&shifted_power(ky).mul(&RatFun::from_poly(rest)));
            }
            let r = r.mul(&prefactor);
            let slot = out.entry(k).or_default();
            *slot = slot.add(&r);
        }
    }
    out.retain(|_, r| !r.is_zero());
    Ok(out)
}

/// Coefficients of the iterate as rational functions of `(z1, z2)`.
pub fn iterate_coefficients(
    h: &HSpace,
    m: &ModulePresentation,
    u1: &FreeElem,
    u2: &FreeElem,
    w: &WElem,
    max_weight: u32,
    rule: PairingRule,
) -> Result<BTreeMap<Key, RatFun>> {
    let back = iterate_substitution_inverse("z1", "z2", "x0", "x2");
    iterate_coefficients_x(h, m, u1, u2, w, max_weight, rule)?
        .into_iter()
        .map(|(k, r)| Ok((k, crate::ratfun::substitute_vars(&r, &back)?)))
        .collect()
}

/// `<f, Y(Y(u_1, x_0) u_2, x_2) w>` in the coordinates `(x0, x2)`.
pub fn matrix_coeff_iterate_x(
    h: &HSpace,
    m: &ModulePresentation,
    u1: &FreeElem,
    u2: &FreeElem,
    f: &DualFunctional,
    w: &WElem,
) -> Result<RatFun> {
    let top = f.keys().map(|k| k.0.weight()).max().unwrap_or(0);
    let c = iterate_coefficients_x(h, m, u1, u2, w, top, PairingRule::AllMatchings)?;
    Ok(pair_coefficients(f, &c))
}

/// The iterate rewritten with `x0 = z1 - z2`, `x2 = z2`.
pub fn matrix_coeff_iterate(
    h: &HSpace,
    m: &ModulePresentation,
    u1: &FreeElem,
    u2: &FreeElem,
    f: &DualFunctional,
    w: &WElem,
) -> Result<RatFun> {
    let r = matrix_coeff_iterate_x(h, m, u1, u2, f, w)?;
    crate::ratfun::substitute_vars(&r, &iterate_substitution_inverse("z1", "z2", "x0", "x2"))
}

/// `<f, w>` for convenience in callers that mix series and pairings.
pub fn constant_term(f: &DualFunctional, w: &WElem) -> Scalar {
    pairing(f, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{iterate_series_bruteforce, product_series_bruteforce, vertex_series};
    use crate::halgebra::words_up_to;
    use crate::module::{zero_matrix, Matrix};
    use crate::ratfun::{expand_in_region, iterate_substitution, substitute_vars, window, Region};
    use proptest::prelude::*;

    fn w(f: &[(usize, u32)]) -> NegWord {
        NegWord::new(f.to_vec())
    }

    fn fe(f: &[(usize, u32)]) -> FreeElem {
        FreeElem::word(w(f))
    }

    fn spec(index: usize, order: u32, v: &str) -> FactorSpec {
        FactorSpec {
            index,
            order,
            point: FieldPoint::var(v),
        }
    }

    fn d12(k: u32) -> BTreeMap<PoleFactor, u32> {
        [(PoleFactor::Diff("z1".into(), "z2".into()), k)].into_iter().collect()
    }

    fn vac_dual() -> DualFunctional {
        DualFunctional::basis(NegWord::vacuum(), 0)
    }

    #[test]
    fn commutator_examples() {
        let h = HSpace::identity(1);
        assert_eq!(commutator_pm(&h, 0, 1, 0, 1), (int(1), 2));
        assert_eq!(commutator_pm(&h, 0, 1, 0, 2), (int(2), 3));
        assert_eq!(commutator_pm(&h, 0, 2, 0, 1), (int(-2), 3));
    }

    #[test]
    fn single_pair_contraction() {
        let h = HSpace::identity(2);
        let t = contract_two_blocks(&h, &[spec(0, 1, "z1")], &[spec(0, 1, "z2")], PairingRule::AllMatchings)
            .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].scalar, int(1));
        assert!(t[0].poles.is_empty());
        assert_eq!(t[0].residual, vec![spec(0, 1, "z1"), spec(0, 1, "z2")]);
        assert_eq!(t[1].scalar, int(1));
        assert_eq!(t[1].poles, d12(2));
        assert!(t[1].residual.is_empty());

        let t = contract_two_blocks(&h, &[spec(0, 1, "z1")], &[spec(1, 1, "z2")], PairingRule::AllMatchings)
            .unwrap();
        assert_eq!(t.len(), 1);
        assert!(t[0].poles.is_empty());
    }

    #[test]
    fn pattern_enumeration() {
        let all = enumerate_patterns(2, 2, PairingRule::AllMatchings);
        let ord = enumerate_patterns(2, 2, PairingRule::OrderedOnly);
        assert_eq!(all.iter().filter(|p| p.p.len() == 1).count(), 4);
        assert_eq!(all.iter().filter(|p| p.p.len() == 2).count(), 2);
        assert_eq!(ord.iter().filter(|p| p.p.len() == 2).count(), 1);
        let full = ord.iter().find(|p| p.p.len() == 2).unwrap();
        assert_eq!(full.p, vec![1, 0]);
        assert_eq!(full.q, vec![0, 1]);
        assert_eq!(enumerate_patterns(3, 0, PairingRule::AllMatchings).len(), 1);
    }

    #[test]
    fn two_by_two_blocks() {
        let h = HSpace::identity(2);
        let left = [spec(0, 1, "z1"), spec(1, 1, "z1")];
        let right = [spec(1, 1, "z2"), spec(0, 1, "z2")];
        for rule in [PairingRule::AllMatchings, PairingRule::OrderedOnly] {
            let t = contract_two_blocks(&h, &left, &right, rule).unwrap();
            let full: Vec<_> = t.iter().filter(|t| t.residual.is_empty()).collect();
            assert_eq!(full.len(), 1);
            assert_eq!(full[0].scalar, int(1));
            assert_eq!(full[0].poles, d12(4));
            assert_eq!(t.iter().filter(|t| t.residual.len() == 2).count(), 2);
            assert_eq!(t.len(), 4);
        }
    }

    #[test]
    fn three_blocks() {
        let h = HSpace::identity(1);
        let blocks: Vec<Block> = ["z1", "z2", "z3"]
            .iter()
            .map(|v| Block::from_word(&w(&[(0, 1)]), FieldPoint::var(v)))
            .collect();
        let t = reduce_blocks(&h, &blocks, PairingRule::AllMatchings).unwrap();
        assert_eq!(t.len(), 4);
        let singles: Vec<_> = t.iter().filter(|t| t.residual.len() == 1).collect();
        assert_eq!(singles.len(), 3);
        let mut poles: Vec<_> = singles
            .iter()
            .map(|t| t.poles.iter().next().map(|(f, k)| (f.clone(), *k)).unwrap())
            .collect();
        poles.sort();
        assert_eq!(
            poles,
            vec![
                (PoleFactor::Diff("z1".into(), "z2".into()), 2),
                (PoleFactor::Diff("z1".into(), "z3".into()), 2),
                (PoleFactor::Diff("z2".into(), "z3".into()), 2),
            ]
        );
        assert!(t.iter().all(|t| !t.residual.is_empty()));
        let single = reduce_blocks(&h, &blocks[..1], PairingRule::AllMatchings).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].residual, blocks[0].specs());
    }

    #[test]
    fn residual_pairings() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        let empty = ContractionTerm {
            scalar: int(1),
            poles: BTreeMap::new(),
            residual: vec![],
        };
        let x = WElem::basis(w(&[(1, 2)]), 0);
        let f = DualFunctional::basis(w(&[(1, 2)]), 0);
        assert_eq!(matrix_coeff_normal_ordered(&h, &m, &empty, &f, &x), LaurentPoly::one());

        let one = ContractionTerm {
            residual: vec![spec(0, 1, "x1")],
            ..empty.clone()
        };
        let f = DualFunctional::basis(w(&[(0, 1)]), 0);
        let p = matrix_coeff_normal_ordered(&h, &m, &one, &f, &WElem::vacuum(0));
        assert_eq!(p, LaurentPoly::one());

        let two = ContractionTerm {
            residual: vec![spec(0, 1, "x1"), spec(1, 1, "x2")],
            ..empty
        };
        assert!(matrix_coeff_normal_ordered(&h, &m, &two, &vac_dual(), &WElem::vacuum(0)).is_zero());
    }

    #[test]
    fn residual_action_matches_series() {
        // a single-block residual is Y(u, x) itself
        let h = HSpace::new(vec![vec![int(1), int(2)], vec![int(2), int(-1)]]).unwrap();
        let one = |x: i64| -> Matrix { vec![vec![int(x)]] };
        let m = ModulePresentation::new(vec![int(0)], vec![one(2), one(-3)], zero_matrix(1)).unwrap();
        for u in words_up_to(2, 3) {
            for x in words_up_to(2, 2) {
                let xw = WElem::basis(x, 0);
                let block = Block::from_word(&u, FieldPoint::var("x"));
                let act = normal_ordered_action(&h, &m, &block.specs(), &xw, 5);
                let s = vertex_series(&h, &m, &FreeElem::word(u.clone()), &xw, -6, 5).unwrap();
                for (e, c) in s.coeffs {
                    for (k, v) in c.terms() {
                        if k.0.weight() <= 5 {
                            let got = act.get(k).map(|p| p.coeff(&[("x", e)])).unwrap_or_default();
                            assert_eq!(&got, v, "u={u} e={e}");
                        }
                    }
                }
                let total: usize = act.values().map(|p| p.len()).sum();
                let want: usize = vertex_series(&h, &m, &FreeElem::word(u.clone()), &xw, -6, 5)
                    .unwrap()
                    .coeffs
                    .values()
                    .map(|c| c.terms().filter(|(k, _)| k.0.weight() <= 5).count())
                    .sum();
                assert_eq!(total, want);
            }
        }
    }

    #[test]
    fn two_point_function() {
        let h = HSpace::identity(1);
        let m = ModulePresentation::trivial(1);
        let u = fe(&[(0, 1)]);
        let r = matrix_coeff_product(&h, &m, &[u.clone(), u.clone()], &vac_dual(), &WElem::vacuum(0)).unwrap();
        assert_eq!(r, RatFun::new(LaurentPoly::one(), d12(2)));
        let r = matrix_coeff_product(
            &h,
            &m,
            &[FreeElem::vacuum(), FreeElem::vacuum()],
            &vac_dual(),
            &WElem::vacuum(0),
        )
        .unwrap();
        assert_eq!(r, RatFun::one());
        let it = matrix_coeff_iterate(&h, &m, &u, &u, &vac_dual(), &WElem::vacuum(0)).unwrap();
        assert_eq!(it, RatFun::new(LaurentPoly::one(), d12(2)));
    }

    #[test]
    fn noncommutative_creation() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        let f = DualFunctional::basis(w(&[(0, 1), (1, 1)]), 0);
        let a = matrix_coeff_product(&h, &m, &[fe(&[(0, 1)]), fe(&[(1, 1)])], &f, &WElem::vacuum(0)).unwrap();
        let b = matrix_coeff_product(&h, &m, &[fe(&[(1, 1)]), fe(&[(0, 1)])], &f, &WElem::vacuum(0)).unwrap();
        assert_eq!(a, RatFun::one());
        assert!(b.is_zero());
    }

    #[test]
    fn squared_field_two_point() {
        // every matching contributes: 2 (z1 - z2)^{-4}
        let h = HSpace::identity(1);
        let m = ModulePresentation::trivial(1);
        let u = fe(&[(0, 1), (0, 1)]);
        let r = matrix_coeff_product(&h, &m, &[u.clone(), u.clone()], &vac_dual(), &WElem::vacuum(0)).unwrap();
        assert_eq!(r, RatFun::new(LaurentPoly::constant(int(2)), d12(4)));
        let win = window(&[("z1", -10, 2), ("z2", 0, 6)]);
        let b = product_series_bruteforce(&h, &m, &[u.clone(), u.clone()], &WElem::vacuum(0), &vac_dual(), &win)
            .unwrap();
        let e = expand_in_region(&r, &Region::ordered(&["z1", "z2"]), &win).unwrap();
        assert_eq!(e, b.poly);
        let ordered = matrix_coeff_product_with(
            &h,
            &m,
            &[u.clone(), u],
            &vac_dual(),
            &WElem::vacuum(0),
            PairingRule::OrderedOnly,
        )
        .unwrap();
        let e = expand_in_region(&ordered, &Region::ordered(&["z1", "z2"]), &win).unwrap();
        assert_ne!(e, b.poly);
    }

    #[test]
    fn iterate_terms() {
        let h = HSpace::identity(1);
        let u = fe(&[(0, 1)]);
        let t = iterate_closed_form(&h, &u, &u, PairingRule::AllMatchings).unwrap();
        assert_eq!(t.len(), 2);
        let full = t.iter().find(|t| t.residual.is_empty()).unwrap();
        assert_eq!(full.poles, [(PoleFactor::Var("x0".into()), 2)].into_iter().collect());
        let open = t.iter().find(|t| !t.residual.is_empty()).unwrap();
        assert_eq!(open.residual.len(), 2);
        assert_eq!(
            open.residual[0].point,
            FieldPoint::Shifted {
                base: "x2".into(),
                offset: "x0".into()
            }
        );
        let t = iterate_closed_form(&h, &FreeElem::vacuum(), &u, PairingRule::AllMatchings).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].residual, vec![spec(0, 1, "x2")]);
    }

    #[test]
    fn iterate_with_vacuum_first_is_single_operator() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        let u = fe(&[(0, 1), (1, 2)]);
        let f = DualFunctional::basis(w(&[(0, 1), (1, 2), (1, 1)]), 0);
        let x = WElem::basis(w(&[(1, 1)]), 0);
        let it = matrix_coeff_iterate(&h, &m, &FreeElem::vacuum(), &u, &f, &x).unwrap();
        let single = product_coefficients(&h, &m, &[u], &x, 4, PairingRule::AllMatchings).unwrap();
        let single = pair_coefficients(&f, &single);
        let single = substitute_vars(&single, &[("z1".to_string(), [("z2".to_string(), 1)].into_iter().collect())].into_iter().collect()).unwrap();
        assert_eq!(it, single);
    }

    #[test]
    fn shifted_fields_match_oracle() {
        // u2 = 1: the iterate is Y(u1, x2 + x0) expanded in |x2| > |x0|
        let h = HSpace::identity(1);
        let m = ModulePresentation::trivial(1);
        let u1 = fe(&[(0, 1), (0, 2)]);
        let x = WElem::basis(w(&[(0, 1), (0, 2)]), 0);
        for f in words_up_to(1, 4) {
            let f = DualFunctional::basis(f, 0);
            let r = matrix_coeff_iterate_x(&h, &m, &u1, &FreeElem::vacuum(), &f, &x).unwrap();
            let win = window(&[("x0", 0, 5), ("x2", -8, 3)]);
            let e = expand_in_region(&r, &Region::ordered(&["x2", "x0"]), &win).unwrap();
            let b = iterate_series_bruteforce(&h, &m, &u1, &FreeElem::vacuum(), &x, &f, &win).unwrap();
            assert_eq!(e, b.poly);
        }
    }

    #[test]
    fn iterate_matches_bruteforce_in_x_coordinates() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        let u1 = fe(&[(0, 1), (1, 1)]);
        let u2 = fe(&[(1, 2)]);
        let win = window(&[("x0", -5, 3), ("x2", -6, 3)]);
        for f in words_up_to(2, 4) {
            let f = DualFunctional::basis(f, 0);
            let r = matrix_coeff_iterate_x(&h, &m, &u1, &u2, &f, &WElem::vacuum(0)).unwrap();
            let e = expand_in_region(&r, &Region::ordered(&["x2", "x0"]), &win).unwrap();
            let b = iterate_series_bruteforce(&h, &m, &u1, &u2, &WElem::vacuum(0), &f, &win).unwrap();
            assert_eq!(e, b.poly);
            // associativity
            let p = matrix_coeff_product(&h, &m, &[u1.clone(), u2.clone()], &f, &WElem::vacuum(0)).unwrap();
            let sub = substitute_vars(&p, &iterate_substitution("z1", "z2", "x0", "x2")).unwrap();
            assert_eq!(sub, r);
        }
    }

    fn arb_word() -> impl Strategy<Value = NegWord> {
        prop::collection::vec((0usize..2, 1u32..3), 0..3).prop_map(NegWord::new)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn fold_order_does_not_matter(a in arb_word(), b in arb_word(), c in arb_word()) {
            let h = HSpace::new(vec![vec![int(1), int(2)], vec![int(2), int(-1)]]).unwrap();
            let blocks = vec![
                Block::from_word(&a, FieldPoint::var("z1")),
                Block::from_word(&b, FieldPoint::var("z2")),
                Block::from_word(&c, FieldPoint::var("z3")),
            ];
            let l = reduce_blocks(&h, &blocks, PairingRule::AllMatchings).unwrap();
            let r = reduce_blocks_right(&h, &blocks, PairingRule::AllMatchings).unwrap();
            prop_assert_eq!(l, r);
        }

        #[test]
        fn poles_stay_on_the_admissible_locus(a in arb_word(), b in arb_word(), f in arb_word()) {
            let h = HSpace::identity(2);
            let m = ModulePresentation::trivial(2);
            let f = DualFunctional::basis(f, 0);
            let us = [FreeElem::word(a), FreeElem::word(b)];
            let r = matrix_coeff_product(&h, &m, &us, &f, &WElem::vacuum(0)).unwrap();
            prop_assert!(r.poles_are_admissible());
            let it = matrix_coeff_iterate(&h, &m, &us[0], &us[1], &f, &WElem::vacuum(0)).unwrap();
            prop_assert!(it.poles_are_admissible());
        }
    }
}
