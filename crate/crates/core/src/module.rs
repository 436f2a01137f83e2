//! Matrix-presented `T(h)`-modules `M` and the induced modules
//! `W = T(h_-) (x) M` with their mode actions.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::halgebra::{Diagnostics, HSpace, NegWord};
use crate::scalar::{self, add_to, coeff_prefix, int, join_signed, mul, Scalar};

/// Square matrix acting on column vectors: `A e_t = sum_s A[s][t] e_s`.
pub type Matrix = Vec<Vec<Scalar>>;

pub fn zero_matrix(r: usize) -> Matrix {
    vec![vec![Scalar::zero(); r]; r]
}

pub fn identity_matrix(r: usize) -> Matrix {
    (0..r)
        .map(|i| (0..r).map(|j| int((i == j) as i64)).collect())
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let r = a.len();
    let mut out = zero_matrix(r);
    for i in 0..r {
        for k in 0..r {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..r {
                if !b[k][j].is_zero() {
                    let x = &a[i][k] * &b[k][j];
                    out[i][j] += x;
                }
            }
        }
    }
    out
}

fn is_zero_matrix(a: &Matrix) -> bool {
    a.iter().all(|r| r.iter().all(Zero::is_zero))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModulePresentation {
    weights: Vec<Scalar>,
    action: Vec<Matrix>,
    dm: Matrix,
}

impl ModulePresentation {
    pub fn new(weights: Vec<Scalar>, action: Vec<Matrix>, dm: Matrix) -> Result<Self> {
        let r = weights.len();
        if r == 0 {
            return Err(Error::config("module.weights", "module dimension must be positive"));
        }
        let check = |path: String, m: &Matrix| -> Result<()> {
            if m.len() != r {
                return Err(Error::config(path, format!("expected {r} rows, found {}", m.len())));
            }
            for (i, row) in m.iter().enumerate() {
                if row.len() != r {
                    return Err(Error::config(
                        format!("{path}[{i}]"),
                        format!("expected {r} entries, found {}", row.len()),
                    ));
                }
            }
            Ok(())
        };
        for (i, a) in action.iter().enumerate() {
            check(format!("module.action[{i}]"), a)?;
        }
        check("module.dm".into(), &dm)?;
        Ok(ModulePresentation {
            weights,
            action,
            dm,
        })
    }

    /// One-dimensional module of weight 0 on which `h` acts by zero.
    pub fn trivial(d: usize) -> Self {
        ModulePresentation {
            weights: vec![Scalar::zero()],
            action: vec![zero_matrix(1); d],
            dm: zero_matrix(1),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, s: usize) -> &Scalar {
        &self.weights[s]
    }

    pub fn weights(&self) -> &[Scalar] {
        &self.weights
    }

    pub fn rho(&self, i: usize) -> &Matrix {
        &self.action[i]
    }

    pub fn action(&self) -> &[Matrix] {
        &self.action
    }

    pub fn dm(&self) -> &Matrix {
        &self.dm
    }

    pub fn rho_is_zero(&self, i: usize) -> bool {
        is_zero_matrix(&self.action[i])
    }

    pub fn all_rho_zero(&self) -> bool {
        (0..self.action.len()).all(|i| self.rho_is_zero(i))
    }

    pub fn min_weight(&self) -> Scalar {
        self.weights.iter().min().cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn check_index(&self, s: usize) -> Result<()> {
        if s < self.dim() {
            Ok(())
        } else {
            Err(Error::ModuleIndexOutOfRange {
                index: s + 1,
                dim: self.dim(),
            })
        }
    }
}

pub fn validate_module(m: &ModulePresentation) -> Diagnostics {
    let mut d = Diagnostics::default();
    let r = m.dim();
    for (i, a) in m.action.iter().enumerate() {
        for s in 0..r {
            for t in 0..r {
                if !a[s][t].is_zero() && m.weights[s] != m.weights[t] {
                    d.push(format!(
                        "action[{i}][{s}][{t}] = {} maps weight {} to weight {}",
                        scalar::render(&a[s][t]),
                        scalar::render(&m.weights[t]),
                        scalar::render(&m.weights[s])
                    ));
                }
            }
        }
    }
    for s in 0..r {
        for t in 0..r {
            if !m.dm[s][t].is_zero() && m.weights[s] != &m.weights[t] + Scalar::one() {
                d.push(format!(
                    "dm[{s}][{t}] = {} changes weight by {} instead of 1",
                    scalar::render(&m.dm[s][t]),
                    scalar::render(&(&m.weights[s] - &m.weights[t]))
                ));
            }
        }
    }
    for (i, a) in m.action.iter().enumerate() {
        let lhs = mat_mul(&m.dm, a);
        let rhs = mat_mul(a, &m.dm);
        for s in 0..r {
            for t in 0..r {
                if lhs[s][t] != rhs[s][t] {
                    d.push(format!(
                        "dm does not commute with action[{i}]: entry [{s}][{t}] of the commutator is {}",
                        scalar::render(&(&lhs[s][t] - &rhs[s][t]))
                    ));
                }
            }
        }
    }
    d
}

/// Basis vector `word (x) e_index` of `W`.
pub type Key = (NegWord, usize);

pub fn key_weight(m: &ModulePresentation, k: &Key) -> Scalar {
    int(k.0.weight() as i64) + m.weight(k.1)
}

pub fn render_key(k: &Key, r: usize) -> String {
    if r == 1 {
        k.0.to_string()
    } else {
        format!("{}e{}", k.0.render_factors(), k.1 + 1)
    }
}

/// Finite linear combination of basis vectors of `W`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WElem {
    terms: BTreeMap<Key, Scalar>,
}

impl WElem {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(word: NegWord, index: usize) -> Self {
        Self::term((word, index), Scalar::one())
    }

    /// `1 (x) e_index`.
    pub fn vacuum(index: usize) -> Self {
        Self::basis(NegWord::vacuum(), index)
    }

    pub fn term(k: Key, c: Scalar) -> Self {
        let mut e = Self::zero();
        e.add_term(k, c);
        e
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Key, Scalar)>) -> Self {
        let mut e = Self::zero();
        for (k, c) in terms {
            e.add_term(k, c);
        }
        e
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Key, &Scalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, k: &Key) -> Scalar {
        self.terms.get(k).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, k: Key, c: Scalar) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(k) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                add_to(e.get_mut(), &c);
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &WElem) -> WElem {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &WElem) {
        for (k, c) in &other.terms {
            self.add_term(k.clone(), c.clone());
        }
    }

    pub fn sub(&self, other: &WElem) -> WElem {
        self.add(&other.scale(&-Scalar::one()))
    }

    pub fn scale(&self, c: &Scalar) -> WElem {
        if c.is_zero() {
            return WElem::zero();
        }
        WElem {
            terms: self.terms.iter().map(|(k, x)| (k.clone(), mul(x, c))).collect(),
        }
    }

    pub fn max_word_weight(&self) -> u32 {
        self.terms.keys().map(|k| k.0.weight()).max().unwrap_or(0)
    }

    pub fn min_word_weight(&self) -> u32 {
        self.terms.keys().map(|k| k.0.weight()).min().unwrap_or(0)
    }

    /// Splits into components of equal total weight.
    pub fn homogeneous_components(&self, m: &ModulePresentation) -> BTreeMap<Scalar, WElem> {
        let mut out: BTreeMap<Scalar, WElem> = BTreeMap::new();
        for (k, c) in &self.terms {
            out.entry(key_weight(m, k))
                .or_default()
                .add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn render(&self, r: usize) -> String {
        join_signed(
            self.terms
                .iter()
                .map(|(k, c)| coeff_prefix(c, &render_key(k, r))),
        )
    }
}

/// Element of the restricted dual, stored in the dual basis.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DualFunctional(pub WElem);

impl DualFunctional {
    pub fn basis(word: NegWord, index: usize) -> Self {
        DualFunctional(WElem::basis(word, index))
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.0.terms.keys()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Key, &Scalar)> {
        self.0.terms()
    }

    /// Word weights on which the functional is supported.
    pub fn word_weights(&self) -> Vec<u32> {
        let mut w: Vec<u32> = self.keys().map(|k| k.0.weight()).collect();
        w.sort_unstable();
        w.dedup();
        w
    }
}

impl fmt::Display for WElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(2))
    }
}

pub fn pairing(f: &DualFunctional, w: &WElem) -> Scalar {
    let (small, big) = if f.0.len() <= w.len() {
        (&f.0, w)
    } else {
        (w, &f.0)
    };
    let mut s = Scalar::zero();
    for (k, c) in &small.terms {
        if let Some(d) = big.terms.get(k) {
            s += c * d;
        }
    }
    s
}

/// Action of `a_i(n)` on a single basis vector, accumulated into `out`.
pub(crate) fn apply_mode_key(
    h: &HSpace,
    m: &ModulePresentation,
    i: usize,
    n: i64,
    key: &Key,
    c: &Scalar,
    out: &mut WElem,
) {
    let (word, s) = key;
    match n.cmp(&0) {
        std::cmp::Ordering::Less => {
            let mut f = Vec::with_capacity(word.len() + 1);
            f.push((i, (-n) as u32));
            f.extend_from_slice(word.factors());
            out.add_term((NegWord(f), *s), c.clone());
        }
        std::cmp::Ordering::Greater => {
            let fs = word.factors();
            for (p, &(b, mp)) in fs.iter().enumerate() {
                if mp as i64 != n {
                    continue;
                }
                let g = h.form(i, b);
                if g.is_zero() {
                    continue;
                }
                let mut rest = Vec::with_capacity(fs.len() - 1);
                rest.extend_from_slice(&fs[..p]);
                rest.extend_from_slice(&fs[p + 1..]);
                out.add_term((NegWord(rest), *s), mul(&mul(c, g), &int(n)));
            }
        }
        std::cmp::Ordering::Equal => {
            let rho = m.rho(i);
            for (t, row) in rho.iter().enumerate() {
                let x = &row[*s];
                if !x.is_zero() {
                    out.add_term((word.clone(), t), mul(c, x));
                }
            }
        }
    }
}

/// `a_i(n) w`.
pub fn apply_mode(
    h: &HSpace,
    m: &ModulePresentation,
    i: usize,
    n: i64,
    w: &WElem,
) -> Result<WElem> {
    h.check_index(i)?;
    let mut out = WElem::zero();
    for (k, c) in &w.terms {
        m.check_index(k.1)?;
        apply_mode_key(h, m, i, n, k, c, &mut out);
    }
    Ok(out)
}

/// Grading operator `d`.
pub fn apply_d(m: &ModulePresentation, w: &WElem) -> WElem {
    let mut out = WElem::zero();
    for (k, c) in &w.terms {
        out.add_term(k.clone(), c * key_weight(m, k));
    }
    out
}

/// `D` on `T(h_-)` words: raise one factor's order, weighted by it.
pub fn derive_word(word: &NegWord) -> Vec<(NegWord, Scalar)> {
    let fs = word.factors();
    (0..fs.len())
        .map(|p| {
            let mut f = fs.to_vec();
            f[p].1 += 1;
            (NegWord(f), int(fs[p].1 as i64))
        })
        .collect()
}

/// `D_W = D (x) 1 + 1 (x) D_M`.
#[allow(non_snake_case)]
pub fn apply_D(m: &ModulePresentation, w: &WElem) -> WElem {
    let mut out = WElem::zero();
    for ((word, s), c) in &w.terms {
        for (dw, k) in derive_word(word) {
            out.add_term((dw, *s), c * k);
        }
        for (t, row) in m.dm.iter().enumerate() {
            let x = &row[*s];
            if !x.is_zero() {
                out.add_term((word.clone(), t), mul(c, x));
            }
        }
    }
    out
}

/// `D` on elements of `T(h_-)`.
pub fn derive_free(u: &crate::halgebra::FreeElem) -> crate::halgebra::FreeElem {
    let mut out = crate::halgebra::FreeElem::zero();
    for (w, c) in u.terms() {
        for (dw, k) in derive_word(w) {
            out.add_term(dw, c * k);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halgebra::words_up_to;
    use crate::scalar::ratio;
    use proptest::prelude::*;

    fn mat(rows: &[&[i64]]) -> Matrix {
        rows.iter().map(|r| r.iter().map(|x| int(*x)).collect()).collect()
    }

    fn w(f: &[(usize, u32)]) -> NegWord {
        NegWord::new(f.to_vec())
    }

    /// r = 4, weights [0, 0, 1, 1], noncommuting zero modes, nonzero D_M.
    fn graded_module() -> ModulePresentation {
        let a1 = mat(&[&[0, 1], &[0, 0]]);
        let a2 = mat(&[&[0, 0], &[1, 0]]);
        let block = |a: &Matrix| -> Matrix {
            let mut m = zero_matrix(4);
            for s in 0..2 {
                for t in 0..2 {
                    m[s][t] = a[s][t].clone();
                    m[s + 2][t + 2] = a[s][t].clone();
                }
            }
            m
        };
        let mut dm = zero_matrix(4);
        dm[2][0] = int(1);
        dm[3][1] = int(1);
        ModulePresentation::new(
            vec![int(0), int(0), int(1), int(1)],
            vec![block(&a1), block(&a2)],
            dm,
        )
        .unwrap()
    }

    #[test]
    fn module_validation() {
        let t = ModulePresentation::new(vec![int(0)], vec![mat(&[&[3]])], mat(&[&[0]])).unwrap();
        assert!(validate_module(&t).passed());
        let nc = ModulePresentation::new(
            vec![int(0), int(0)],
            vec![mat(&[&[0, 1], &[0, 0]]), mat(&[&[0, 0], &[1, 0]])],
            zero_matrix(2),
        )
        .unwrap();
        assert!(validate_module(&nc).passed());
        let ok = ModulePresentation::new(
            vec![int(0), int(1)],
            vec![mat(&[&[2, 0], &[0, 5]])],
            mat(&[&[0, 0], &[1, 0]]),
        )
        .unwrap();
        // diagonal action that does not commute with D_M is still reported
        assert_eq!(validate_module(&ok).issues.len(), 1);
        let scalar_action = ModulePresentation::new(
            vec![int(0), int(1)],
            vec![mat(&[&[2, 0], &[0, 2]])],
            mat(&[&[0, 0], &[1, 0]]),
        )
        .unwrap();
        assert!(validate_module(&scalar_action).passed());
        let bad = ModulePresentation::new(
            vec![int(0), int(1)],
            vec![mat(&[&[2, 0], &[0, 2]])],
            mat(&[&[0, 1], &[0, 0]]),
        )
        .unwrap();
        let issues = validate_module(&bad).issues;
        assert_eq!(issues.len(), 1);
        assert!(issues[0].contains("dm[0][1]"));
        assert!(validate_module(&graded_module()).passed());
    }

    #[test]
    fn mode_examples() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        let v = WElem::vacuum(0);
        assert_eq!(apply_mode(&h, &m, 0, -2, &v).unwrap(), WElem::basis(w(&[(0, 2)]), 0));
        let x = WElem::basis(w(&[(0, 2)]), 0);
        assert_eq!(apply_mode(&h, &m, 0, 2, &x).unwrap(), WElem::vacuum(0).scale(&int(2)));
        let y = WElem::basis(w(&[(1, 1), (0, 1)]), 0);
        assert_eq!(apply_mode(&h, &m, 0, 1, &y).unwrap(), WElem::basis(w(&[(1, 1)]), 0));
        assert!(apply_mode(&h, &m, 2, 1, &y).is_err());
    }

    #[test]
    fn grading_and_derivation() {
        let m = ModulePresentation::trivial(2);
        let x = WElem::basis(w(&[(0, 1), (0, 2)]), 0);
        assert_eq!(apply_d(&m, &x), x.scale(&int(3)));
        assert!(apply_d(&m, &WElem::vacuum(0)).is_zero());
        let mixed = x.add(&WElem::basis(w(&[(1, 1)]), 0).scale(&ratio(1, 2)));
        assert_eq!(
            apply_d(&m, &mixed),
            x.scale(&int(3)).add(&WElem::basis(w(&[(1, 1)]), 0).scale(&ratio(1, 2)))
        );

        assert_eq!(
            apply_D(&m, &WElem::basis(w(&[(0, 1)]), 0)),
            WElem::basis(w(&[(0, 2)]), 0)
        );
        assert!(apply_D(&m, &WElem::vacuum(0)).is_zero());
        assert_eq!(
            apply_D(&m, &WElem::basis(w(&[(0, 1), (1, 2)]), 0)),
            WElem::basis(w(&[(0, 2), (1, 2)]), 0)
                .add(&WElem::basis(w(&[(0, 1), (1, 3)]), 0).scale(&int(2)))
        );
    }

    #[test]
    fn pairing_examples() {
        let f = DualFunctional::basis(w(&[(0, 1)]), 0);
        assert_eq!(pairing(&f, &WElem::basis(w(&[(0, 1)]), 0)), int(1));
        assert_eq!(pairing(&f, &WElem::basis(w(&[(1, 1)]), 0)), int(0));
        let u = WElem::basis(w(&[(0, 1)]), 0);
        let v = WElem::basis(w(&[(1, 1)]), 0).add(&u);
        let lhs = pairing(&f, &u.scale(&int(2)).add(&v.scale(&int(3))));
        assert_eq!(lhs, int(2) * pairing(&f, &u) + int(3) * pairing(&f, &v));
    }

    #[test]
    fn zero_modes_compose_in_order() {
        let h = HSpace::identity(2);
        let m = graded_module();
        let v = WElem::vacuum(1);
        let ab = apply_mode(&h, &m, 0, 0, &apply_mode(&h, &m, 1, 0, &v).unwrap()).unwrap();
        let ba = apply_mode(&h, &m, 1, 0, &apply_mode(&h, &m, 0, 0, &v).unwrap()).unwrap();
        let rr = mat_mul(m.rho(0), m.rho(1));
        let mut expect = WElem::zero();
        for (t, row) in rr.iter().enumerate() {
            expect.add_term((NegWord::vacuum(), t), row[1].clone());
        }
        assert_eq!(ab, expect);
        assert_ne!(ab, ba);
    }

    fn sample(d: usize, r: usize) -> Vec<WElem> {
        let mut out = Vec::new();
        for word in words_up_to(d, 3) {
            for s in 0..r {
                out.push(WElem::basis(word.clone(), s));
            }
        }
        out
    }

    #[test]
    fn heisenberg_relation_on_samples() {
        let h = HSpace::new(mat(&[&[1, 2], &[2, -3]])).unwrap();
        let m = graded_module();
        for x in sample(2, 4) {
            for i in 0..2 {
                for j in 0..2 {
                    for n in 1..4i64 {
                        for k in 1..4i64 {
                            let a = apply_mode(&h, &m, i, n, &apply_mode(&h, &m, j, -k, &x).unwrap()).unwrap();
                            let b = apply_mode(&h, &m, j, -k, &apply_mode(&h, &m, i, n, &x).unwrap()).unwrap();
                            let expect = if n == k { x.scale(&(int(n) * h.form(i, j))) } else { WElem::zero() };
                            assert_eq!(a.sub(&b), expect);
                        }
                    }
                    // zero modes commute with nonzero modes
                    for n in [-2i64, -1, 1, 2] {
                        let a = apply_mode(&h, &m, i, 0, &apply_mode(&h, &m, j, n, &x).unwrap()).unwrap();
                        let b = apply_mode(&h, &m, j, n, &apply_mode(&h, &m, i, 0, &x).unwrap()).unwrap();
                        assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn positive_modes_kill_vacuum() {
        let h = HSpace::identity(2);
        let m = graded_module();
        for s in 0..4 {
            for n in 1..4 {
                assert!(apply_mode(&h, &m, 0, n, &WElem::vacuum(s)).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn derivation_commutators_on_trivial_module() {
        let h = HSpace::identity(2);
        let m = ModulePresentation::trivial(2);
        for x in sample(2, 1) {
            for i in 0..2 {
                for k in 1..4i64 {
                    let dn = apply_D(&m, &apply_mode(&h, &m, i, -k, &x).unwrap());
                    let nd = apply_mode(&h, &m, i, -k, &apply_D(&m, &x)).unwrap();
                    let rhs = apply_mode(&h, &m, i, -k - 1, &x).unwrap().scale(&int(k));
                    assert_eq!(dn.sub(&nd), rhs);

                    let dp = apply_D(&m, &apply_mode(&h, &m, i, k, &x).unwrap());
                    let pd = apply_mode(&h, &m, i, k, &apply_D(&m, &x)).unwrap();
                    let rhs = apply_mode(&h, &m, i, k - 1, &x).unwrap().scale(&int(-k));
                    assert_eq!(dp.sub(&pd), rhs);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn weight_bookkeeping(
            f in prop::collection::vec((0usize..2, 1u32..4), 0..4),
            s in 0usize..4,
            i in 0usize..2,
            n in -3i64..4,
        ) {
            let h = HSpace::identity(2);
            let m = graded_module();
            let x = WElem::basis(NegWord::new(f), s);
            let wt = key_weight(&m, x.terms().next().unwrap().0);
            for (k, _) in apply_mode(&h, &m, i, n, &x).unwrap().terms() {
                prop_assert_eq!(key_weight(&m, k), &wt - int(n));
                prop_assert!(key_weight(&m, k) >= m.min_weight());
            }
            for (k, _) in apply_D(&m, &x).terms() {
                prop_assert_eq!(key_weight(&m, k), &wt + int(1));
            }
            prop_assert_eq!(apply_d(&m, &x), x.scale(&wt));
        }
    }
}
