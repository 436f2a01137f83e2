//! The space `h` with its bilinear form, words of `T(h_-)`, and PBW-type
//! rewriting in the quotient `N(h^)`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{self, add_to, coeff_prefix, int, join_signed, Scalar};

/// Findings of a validation pass. An empty list means the input passed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub issues: Vec<String>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }

    pub(crate) fn push(&mut self, msg: impl Into<String>) {
        self.issues.push(msg.into());
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HSpace {
    dim: usize,
    form: Vec<Vec<Scalar>>,
}

impl HSpace {
    pub fn new(form: Vec<Vec<Scalar>>) -> Result<Self> {
        let dim = form.len();
        if dim == 0 {
            return Err(Error::config("form", "dimension must be positive"));
        }
        for (i, row) in form.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::config(
                    format!("form[{i}]"),
                    format!("expected {dim} entries, found {}", row.len()),
                ));
            }
        }
        Ok(HSpace { dim, form })
    }

    /// `d`-dimensional space with the identity form.
    pub fn identity(dim: usize) -> Self {
        let form = (0..dim)
            .map(|i| (0..dim).map(|j| int((i == j) as i64)).collect())
            .collect();
        HSpace { dim, form }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(a_i, a_j)`, 0-based.
    pub fn form(&self, i: usize, j: usize) -> &Scalar {
        &self.form[i][j]
    }

    pub fn form_matrix(&self) -> &[Vec<Scalar>] {
        &self.form
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.dim {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: index + 1,
                dim: self.dim,
            })
        }
    }
}

pub(crate) fn determinant(m: &[Vec<Scalar>]) -> Scalar {
    let n = m.len();
    let mut a: Vec<Vec<Scalar>> = m.to_vec();
    let mut det = Scalar::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return Scalar::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let piv = a[c][c].clone();
        det *= &piv;
        for r in c + 1..n {
            let f = &a[r][c] / &piv;
            if f.is_zero() {
                continue;
            }
            for k in c..n {
                let x = &a[c][k] * &f;
                a[r][k] -= x;
            }
        }
    }
    det
}

pub fn validate_hspace(h: &HSpace, require_nondegenerate: bool, require_symmetric: bool) -> Diagnostics {
    let mut d = Diagnostics::default();
    if require_nondegenerate && determinant(&h.form).is_zero() {
        d.push("form is degenerate: det = 0");
    }
    if require_symmetric {
        for i in 0..h.dim {
            for j in i + 1..h.dim {
                if h.form[i][j] != h.form[j][i] {
                    d.push(format!(
                        "form is not symmetric: (a{},a{}) = {} but (a{},a{}) = {}",
                        i + 1,
                        j + 1,
                        scalar::render(&h.form[i][j]),
                        j + 1,
                        i + 1,
                        scalar::render(&h.form[j][i])
                    ));
                }
            }
        }
    }
    d
}

/// `a_{i_1}(-m_1) ... a_{i_k}(-m_k) 1`, stored as 0-based `(i, m)` with `m >= 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NegWord(pub Vec<(usize, u32)>);

impl NegWord {
    pub fn vacuum() -> Self {
        NegWord(Vec::new())
    }

    pub fn new(factors: Vec<(usize, u32)>) -> Self {
        debug_assert!(factors.iter().all(|(_, m)| *m >= 1));
        NegWord(factors)
    }

    pub fn factors(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weight(&self) -> u32 {
        self.0.iter().map(|(_, m)| m).sum()
    }

    pub fn concat(&self, other: &NegWord) -> NegWord {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        NegWord(v)
    }

    /// Factor text without the trailing vacuum, e.g. `a1(-1)a2(-3)`.
    pub fn render_factors(&self) -> String {
        self.0
            .iter()
            .map(|(i, m)| format!("a{}(-{m})", i + 1))
            .collect()
    }
}

impl fmt::Display for NegWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}1", self.render_factors())
    }
}

/// Finite linear combination of words in `T(h_-)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreeElem {
    terms: BTreeMap<NegWord, Scalar>,
}

impl FreeElem {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn vacuum() -> Self {
        Self::word(NegWord::vacuum())
    }

    pub fn word(w: NegWord) -> Self {
        Self::term(w, Scalar::one())
    }

    pub fn term(w: NegWord, c: Scalar) -> Self {
        let mut e = Self::zero();
        e.add_term(w, c);
        e
    }

    pub fn terms(&self) -> impl Iterator<Item = (&NegWord, &Scalar)> {
        self.terms.iter()
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

    pub fn coeff(&self, w: &NegWord) -> Scalar {
        self.terms.get(w).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn add_term(&mut self, w: NegWord, c: Scalar) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(w.clone()).or_insert_with(Scalar::zero);
        add_to(e, &c);
        if e.is_zero() {
            self.terms.remove(&w);
        }
    }

    pub fn add(&self, other: &FreeElem) -> FreeElem {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &FreeElem) -> FreeElem {
        self.add(&other.scale(&-Scalar::one()))
    }

    pub fn scale(&self, c: &Scalar) -> FreeElem {
        if c.is_zero() {
            return FreeElem::zero();
        }
        FreeElem {
            terms: self.terms.iter().map(|(w, x)| (w.clone(), x * c)).collect(),
        }
    }

    /// Common weight of all words; `None` if inhomogeneous or zero.
    pub fn weight(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(NegWord::weight);
        let first = it.next()?;
        it.all(|w| w == first).then_some(first)
    }

    pub fn max_weight(&self) -> u32 {
        self.terms.keys().map(NegWord::weight).max().unwrap_or(0)
    }

    pub fn homogeneous_components(&self) -> BTreeMap<u32, FreeElem> {
        let mut out: BTreeMap<u32, FreeElem> = BTreeMap::new();
        for (w, c) in &self.terms {
            out.entry(w.weight()).or_default().add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn render(&self) -> String {
        join_signed(
            self.terms
                .iter()
                .map(|(w, c)| coeff_prefix(c, &w.to_string())),
        )
    }
}

impl fmt::Display for FreeElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Product in the tensor algebra: bilinear word concatenation.
pub fn free_mul(u: &FreeElem, v: &FreeElem) -> FreeElem {
    let mut out = FreeElem::zero();
    for (a, x) in &u.terms {
        for (b, y) in &v.terms {
            out.add_term(a.concat(b), x * y);
        }
    }
    out
}

/// Dimension of the weight-`n` subspace of `T(h_-)` for `dim h = d`.
pub fn graded_dimension(d: usize, n: u32) -> BigUint {
    let mut dims: Vec<BigUint> = vec![BigUint::one()];
    for k in 1..=n as usize {
        let s: BigUint = dims[..k].iter().sum();
        dims.push(s * BigUint::from(d));
    }
    dims[n as usize].clone()
}

/// All words of weight exactly `n`, in lexicographic order of factors.
pub fn enumerate_words(d: usize, n: u32) -> Vec<NegWord> {
    fn go(d: usize, rest: u32, cur: &mut Vec<(usize, u32)>, out: &mut Vec<NegWord>) {
        if rest == 0 {
            out.push(NegWord(cur.clone()));
            return;
        }
        for i in 0..d {
            for m in 1..=rest {
                cur.push((i, m));
                go(d, rest - m, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(d, n, &mut Vec::new(), &mut out);
    out
}

/// All words of weight at most `n`, by weight.
pub fn words_up_to(d: usize, n: u32) -> Vec<NegWord> {
    (0..=n).flat_map(|k| enumerate_words(d, k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HatGenerator {
    /// `a_index (x) t^mode`, 0-based index.
    Mode { index: usize, mode: i64 },
    Central,
}

impl HatGenerator {
    fn class(&self) -> u8 {
        match self {
            HatGenerator::Mode { mode, .. } if *mode < 0 => 0,
            HatGenerator::Mode { mode, .. } if *mode > 0 => 1,
            HatGenerator::Mode { .. } => 2,
            HatGenerator::Central => 3,
        }
    }
}

impl fmt::Display for HatGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HatGenerator::Mode { index, mode } => write!(f, "a{}({mode})", index + 1),
            HatGenerator::Central => f.write_str("k"),
        }
    }
}

/// `(negative modes)(positive modes)(zero modes) k^central`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PbwWord {
    pub neg: Vec<(usize, i64)>,
    pub pos: Vec<(usize, i64)>,
    pub zero: Vec<usize>,
    pub central: u32,
}

impl PbwWord {
    pub fn mode_count(&self) -> usize {
        self.neg.len() + self.pos.len() + self.zero.len()
    }

    fn modes_text(&self) -> String {
        let mut s = String::new();
        for (i, n) in self.neg.iter().chain(&self.pos) {
            s.push_str(&format!("a{}({n})", i + 1));
        }
        for i in &self.zero {
            s.push_str(&format!("a{}(0)", i + 1));
        }
        s
    }

    fn generators(&self) -> Vec<HatGenerator> {
        let mut g: Vec<HatGenerator> = self
            .neg
            .iter()
            .chain(&self.pos)
            .map(|&(index, mode)| HatGenerator::Mode { index, mode })
            .collect();
        g.extend(self.zero.iter().map(|&index| HatGenerator::Mode { index, mode: 0 }));
        g.extend(std::iter::repeat(HatGenerator::Central).take(self.central as usize));
        g
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PbwElem {
    terms: BTreeMap<PbwWord, Scalar>,
}

impl PbwElem {
    pub fn terms(&self) -> impl Iterator<Item = (&PbwWord, &Scalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, w: &PbwWord) -> Scalar {
        self.terms.get(w).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, w: PbwWord, c: Scalar) {
        let e = self.terms.entry(w.clone()).or_insert_with(Scalar::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&w);
        }
    }

    /// Terms with more modes first, e.g. `a1(-1)a1(1) + 1*k`.
    pub fn render(&self) -> String {
        let mut t: Vec<_> = self.terms.iter().collect();
        t.sort_by(|(a, _), (b, _)| b.mode_count().cmp(&a.mode_count()).then(a.cmp(b)));
        join_signed(t.into_iter().map(|(w, c)| {
            let modes = w.modes_text();
            let central = match w.central {
                0 => String::new(),
                1 => "k".to_string(),
                c => format!("k^{c}"),
            };
            if modes.is_empty() {
                let (neg, n) = coeff_prefix(c, "");
                if central.is_empty() {
                    (neg, n)
                } else {
                    (neg, format!("{n}*{central}"))
                }
            } else if central.is_empty() {
                coeff_prefix(c, &modes)
            } else {
                coeff_prefix(c, &format!("{modes}*{central}"))
            }
        }))
    }
}

impl fmt::Display for PbwElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Choice of which reducible adjacent pair to rewrite next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewriteStrategy {
    Leftmost,
    Rightmost,
    Seeded(u64),
}

/// Normal form modulo the defining ideal: `k` is central, zero modes commute
/// with nonzero modes, and `a(m) b(-n) = b(-n) a(m) + m (a,b) delta_{m,n} k`
/// for `m, n > 0`. Nothing else is reordered.
pub fn pbw_normal_form(word: &[HatGenerator], h: &HSpace, strategy: RewriteStrategy) -> PbwElem {
    let mut rng = match strategy {
        RewriteStrategy::Seeded(s) => Some(ChaCha8Rng::seed_from_u64(s)),
        _ => None,
    };
    let mut out = PbwElem::default();
    let mut work: Vec<(Vec<HatGenerator>, Scalar)> = vec![(word.to_vec(), Scalar::one())];
    while let Some((w, c)) = work.pop() {
        if c.is_zero() {
            continue;
        }
        let reducible: Vec<usize> = (0..w.len().saturating_sub(1))
            .filter(|&i| w[i].class() > w[i + 1].class())
            .collect();
        let Some(&first) = reducible.first() else {
            out.add_term(to_pbw_word(&w), c);
            continue;
        };
        let i = match strategy {
            RewriteStrategy::Leftmost => first,
            RewriteStrategy::Rightmost => *reducible.last().unwrap(),
            RewriteStrategy::Seeded(_) => {
                let r = rng.as_mut().unwrap();
                reducible[r.gen_range(0..reducible.len())]
            }
        };
        let mut swapped = w.clone();
        swapped.swap(i, i + 1);
        if let (
            HatGenerator::Mode { index: a, mode: m },
            HatGenerator::Mode { index: b, mode: n },
        ) = (w[i], w[i + 1])
        {
            if m > 0 && n < 0 && m == -n {
                let s = int(m) * h.form(a, b);
                if !s.is_zero() {
                    let mut contracted = w[..i].to_vec();
                    contracted.push(HatGenerator::Central);
                    contracted.extend_from_slice(&w[i + 2..]);
                    work.push((contracted, &c * s));
                }
            }
        }
        work.push((swapped, c));
    }
    out
}

fn to_pbw_word(w: &[HatGenerator]) -> PbwWord {
    let mut p = PbwWord::default();
    for g in w {
        match *g {
            HatGenerator::Mode { index, mode } if mode < 0 => p.neg.push((index, mode)),
            HatGenerator::Mode { index, mode } if mode > 0 => p.pos.push((index, mode)),
            HatGenerator::Mode { index, .. } => p.zero.push(index),
            HatGenerator::Central => p.central += 1,
        }
    }
    p
}

/// Generator sequence of a PBW word, for idempotence checks.
pub fn pbw_generators(w: &PbwWord) -> Vec<HatGenerator> {
    w.generators()
}
