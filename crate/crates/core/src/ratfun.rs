//! Laurent polynomials and rational functions whose denominators are
//! products of the linear factors `z`, `z_i - z_j` and (transiently)
//! `x_i + x_j`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{self, binom_q, coeff_prefix, int, join_signed, Scalar};

/// Orders variable names by alphabetic prefix, then numeric suffix, so that
/// `z2 < z10`.
pub fn cmp_vars(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let cut = s
            .char_indices()
            .rev()
            .take_while(|(_, c)| c.is_ascii_digit())
            .last()
            .map(|(i, _)| i)
            .unwrap_or(s.len());
        (&s[..cut], s[cut..].parse().ok())
    }
    let (pa, na) = split(a);
    let (pb, nb) = split(b);
    pa.cmp(pb).then(na.cmp(&nb)).then(a.cmp(b))
}

fn sort_vars(vars: &mut Vec<String>) {
    vars.sort_by(|a, b| cmp_vars(a, b));
    vars.dedup();
}

fn union_vars(a: &[String], b: &[String]) -> Vec<String> {
    let mut v: Vec<String> = a.iter().chain(b.iter()).cloned().collect();
    sort_vars(&mut v);
    v
}

/// Sparse Laurent polynomial over an ordered list of variables.
#[derive(Clone, Debug, Default)]
pub struct LaurentPoly {
    vars: Vec<String>,
    terms: BTreeMap<Vec<i64>, Scalar>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Scalar) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    pub fn one() -> Self {
        Self::constant(Scalar::one())
    }

    pub fn var(name: &str) -> Self {
        Self::monomial(&[(name, 1)], Scalar::one())
    }

    /// `c * prod(v^e)`; repeated variables accumulate.
    pub fn monomial(exps: &[(&str, i64)], c: Scalar) -> Self {
        let mut vars: Vec<String> = exps.iter().map(|(v, _)| v.to_string()).collect();
        sort_vars(&mut vars);
        let mut e = vec![0i64; vars.len()];
        for (v, k) in exps {
            let i = vars.iter().position(|x| x == v).unwrap();
            e[i] += k;
        }
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(e, c);
        }
        LaurentPoly { vars, terms }
    }

    /// Builds a polynomial from named exponent maps.
    pub fn from_terms<'a>(
        vars: &[&str],
        terms: impl IntoIterator<Item = (&'a [i64], Scalar)>,
    ) -> Self {
        let names: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let mut sorted = names.clone();
        sort_vars(&mut sorted);
        let perm: Vec<usize> = names
            .iter()
            .map(|n| sorted.iter().position(|s| s == n).unwrap())
            .collect();
        let mut p = LaurentPoly {
            vars: sorted,
            terms: BTreeMap::new(),
        };
        for (e, c) in terms {
            let mut key = vec![0i64; p.vars.len()];
            for (i, k) in e.iter().enumerate() {
                key[perm[i]] += k;
            }
            p.add_term(key, c);
        }
        p
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i64>, &Scalar)> {
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

    fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// Coefficient of the monomial with the given named exponents (others 0).
    pub fn coeff(&self, exps: &[(&str, i64)]) -> Scalar {
        let mut key = vec![0i64; self.vars.len()];
        for (v, k) in exps {
            match self.var_index(v) {
                Some(i) => key[i] += k,
                None if *k == 0 => {}
                None => return Scalar::zero(),
            }
        }
        self.terms.get(&key).cloned().unwrap_or_else(Scalar::zero)
    }

    /// Exponent of `name` in an exponent vector of this polynomial.
    pub fn exponent(&self, key: &[i64], name: &str) -> i64 {
        self.var_index(name).map(|i| key[i]).unwrap_or(0)
    }

    fn add_term(&mut self, key: Vec<i64>, c: Scalar) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
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

    /// Re-expresses over a superset of the current variables.
    pub fn with_vars(&self, vars: &[String]) -> Self {
        if vars == self.vars.as_slice() {
            return self.clone();
        }
        let map: Vec<usize> = self
            .vars
            .iter()
            .map(|v| {
                vars.iter()
                    .position(|x| x == v)
                    .expect("target variables must contain the source variables")
            })
            .collect();
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut k = vec![0i64; vars.len()];
            for (i, x) in e.iter().enumerate() {
                k[map[i]] = *x;
            }
            terms.insert(k, c.clone());
        }
        LaurentPoly {
            vars: vars.to_vec(),
            terms,
        }
    }

    /// Drops variables that occur only with exponent zero.
    pub fn trimmed(&self) -> Self {
        let keep: Vec<usize> = (0..self.vars.len())
            .filter(|&i| self.terms.keys().any(|e| e[i] != 0))
            .collect();
        if keep.len() == self.vars.len() {
            return self.clone();
        }
        LaurentPoly {
            vars: keep.iter().map(|&i| self.vars[i].clone()).collect(),
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (keep.iter().map(|&i| e[i]).collect(), c.clone()))
                .collect(),
        }
    }

    /// Variables that actually occur with a nonzero exponent.
    pub fn support_vars(&self) -> Vec<String> {
        self.trimmed().vars
    }

    pub fn add(&self, other: &Self) -> Self {
        let vars = union_vars(&self.vars, &other.vars);
        let mut out = self.with_vars(&vars);
        for (e, c) in other.with_vars(&vars).terms {
            out.add_term(e, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Scalar::one()))
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        if c.is_zero() {
            return LaurentPoly {
                vars: self.vars.clone(),
                terms: BTreeMap::new(),
            };
        }
        LaurentPoly {
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|(e, x)| (e.clone(), x * c))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let vars = union_vars(&self.vars, &other.vars);
        let a = self.with_vars(&vars);
        let b = other.with_vars(&vars);
        let mut out = LaurentPoly {
            vars,
            terms: BTreeMap::new(),
        };
        for (ea, ca) in &a.terms {
            for (eb, cb) in &b.terms {
                let e: Vec<i64> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = LaurentPoly::one();
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Multiplies by the monomial `prod(v^e)`.
    pub fn shift(&self, exps: &[(&str, i64)]) -> Self {
        self.mul(&LaurentPoly::monomial(exps, Scalar::one()))
    }

    pub fn min_exponent(&self, name: &str) -> Option<i64> {
        let i = self.var_index(name)?;
        self.terms.keys().map(|e| e[i]).min()
    }

    /// Keeps the terms whose exponents lie in the window. Variables absent
    /// from the window are unconstrained.
    pub fn restrict(&self, window: &Window) -> Self {
        let bounds: Vec<Option<(i64, i64)>> =
            self.vars.iter().map(|v| window.get(v).copied()).collect();
        let mut out = LaurentPoly {
            vars: self.vars.clone(),
            terms: BTreeMap::new(),
        };
        for (e, c) in &self.terms {
            let inside = e.iter().zip(&bounds).all(|(x, b)| match b {
                Some((lo, hi)) => lo <= x && x <= hi,
                None => true,
            });
            if inside {
                out.terms.insert(e.clone(), c.clone());
            }
        }
        out
    }

    fn sorted_terms(&self) -> Vec<(&Vec<i64>, &Scalar)> {
        let mut t: Vec<_> = self.terms.iter().collect();
        t.sort_by(|(a, _), (b, _)| {
            let da: i64 = a.iter().sum();
            let db: i64 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        t
    }

    fn monomial_text(&self, e: &[i64]) -> String {
        let parts: Vec<String> = self
            .vars
            .iter()
            .zip(e)
            .filter(|(_, k)| **k != 0)
            .map(|(v, k)| {
                if *k == 1 {
                    v.clone()
                } else {
                    format!("{v}^{k}")
                }
            })
            .collect();
        parts.join("*")
    }

    /// Expanded text form, highest total degree first.
    pub fn render(&self) -> String {
        join_signed(
            self.sorted_terms()
                .into_iter()
                .map(|(e, c)| coeff_prefix(c, &self.monomial_text(e))),
        )
    }

    pub fn to_json(&self) -> Value {
        let t = self.trimmed();
        json!({
            "vars": t.vars,
            "terms": t.sorted_terms().into_iter().map(|(e, c)| json!({
                "exponents": e,
                "coeff": scalar::render_pq(c),
            })).collect::<Vec<_>>(),
        })
    }
}

impl PartialEq for LaurentPoly {
    fn eq(&self, other: &Self) -> bool {
        if self.vars == other.vars {
            return self.terms == other.terms;
        }
        let a = self.trimmed();
        let b = other.trimmed();
        a.vars == b.vars && a.terms == b.terms
    }
}

impl Eq for LaurentPoly {}

/// A linear factor allowed in a denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PoleFactor {
    /// `z`
    Var(String),
    /// `z_i - z_j` with `z_i` ordered before `z_j`.
    Diff(String, String),
    /// `x_i + x_j` with `x_i` ordered before `x_j`.
    Sum(String, String),
}

impl PoleFactor {
    /// `a - b` as a stored factor together with the sign relating them.
    pub fn diff(a: &str, b: &str) -> (PoleFactor, i64) {
        match cmp_vars(a, b) {
            Ordering::Less => (PoleFactor::Diff(a.into(), b.into()), 1),
            Ordering::Greater => (PoleFactor::Diff(b.into(), a.into()), -1),
            Ordering::Equal => panic!("difference of a variable with itself"),
        }
    }

    pub fn sum(a: &str, b: &str) -> PoleFactor {
        if cmp_vars(a, b) == Ordering::Greater {
            PoleFactor::Sum(b.into(), a.into())
        } else {
            PoleFactor::Sum(a.into(), b.into())
        }
    }

    fn rank(&self) -> u8 {
        match self {
            PoleFactor::Var(_) => 0,
            PoleFactor::Diff(..) => 1,
            PoleFactor::Sum(..) => 2,
        }
    }

    fn names(&self) -> Vec<&str> {
        match self {
            PoleFactor::Var(a) => vec![a],
            PoleFactor::Diff(a, b) | PoleFactor::Sum(a, b) => vec![a, b],
        }
    }

    pub fn vars(&self) -> Vec<String> {
        self.names().into_iter().map(String::from).collect()
    }

    pub fn poly(&self) -> LaurentPoly {
        match self {
            PoleFactor::Var(a) => LaurentPoly::var(a),
            PoleFactor::Diff(a, b) => LaurentPoly::var(a).sub(&LaurentPoly::var(b)),
            PoleFactor::Sum(a, b) => LaurentPoly::var(a).add(&LaurentPoly::var(b)),
        }
    }

    pub fn render(&self) -> String {
        match self {
            PoleFactor::Var(a) => a.clone(),
            PoleFactor::Diff(a, b) => format!("({a} - {b})"),
            PoleFactor::Sum(a, b) => format!("({a} + {b})"),
        }
    }

    fn linear_form(&self) -> LinearForm {
        let mut f = LinearForm::new();
        match self {
            PoleFactor::Var(a) => {
                f.insert(a.clone(), 1);
            }
            PoleFactor::Diff(a, b) => {
                f.insert(a.clone(), 1);
                f.insert(b.clone(), -1);
            }
            PoleFactor::Sum(a, b) => {
                f.insert(a.clone(), 1);
                f.insert(b.clone(), 1);
            }
        }
        f
    }
}

impl Ord for PoleFactor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank()).then_with(|| {
            let a = self.names();
            let b = other.names();
            for (x, y) in a.iter().zip(&b) {
                let c = cmp_vars(x, y);
                if c != Ordering::Equal {
                    return c;
                }
            }
            a.len().cmp(&b.len())
        })
    }
}

impl PartialOrd for PoleFactor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Integer linear combination of variables.
pub type LinearForm = BTreeMap<String, i64>;

/// Classifies a nonzero linear form as `c * factor`.
pub fn classify_linear_form(form: &LinearForm) -> Result<(PoleFactor, i64)> {
    let mut nz: Vec<(&String, i64)> = form
        .iter()
        .filter(|(_, c)| **c != 0)
        .map(|(v, c)| (v, *c))
        .collect();
    nz.sort_by(|a, b| cmp_vars(a.0, b.0));
    let text = || render_linear_form(form);
    match nz.as_slice() {
        [] => Err(Error::NonInvertibleSubstitution(format!(
            "pole factor maps to zero ({})",
            text()
        ))),
        [(v, c)] => Ok((PoleFactor::Var((*v).clone()), *c)),
        [(a, ca), (b, cb)] if *cb == -*ca => Ok((PoleFactor::Diff((*a).clone(), (*b).clone()), *ca)),
        [(a, ca), (b, cb)] if cb == ca => Ok((PoleFactor::Sum((*a).clone(), (*b).clone()), *ca)),
        _ => Err(Error::UnsupportedPoleFactor(text())),
    }
}

pub fn render_linear_form(form: &LinearForm) -> String {
    let mut nz: Vec<(&String, &i64)> = form.iter().filter(|(_, c)| **c != 0).collect();
    nz.sort_by(|a, b| cmp_vars(a.0, b.0));
    join_signed(nz.into_iter().map(|(v, c)| coeff_prefix(&int(*c), v)))
}

/// Rational function `numerator / prod(factor^k)` kept in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RatFun {
    num: LaurentPoly,
    poles: BTreeMap<PoleFactor, u32>,
}

impl RatFun {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_poly(LaurentPoly::one())
    }

    pub fn constant(c: Scalar) -> Self {
        Self::from_poly(LaurentPoly::constant(c))
    }

    pub fn from_poly(p: LaurentPoly) -> Self {
        Self::new(p, BTreeMap::new())
    }

    /// `num / prod(poles)`, canonicalized.
    pub fn new(num: LaurentPoly, poles: BTreeMap<PoleFactor, u32>) -> Self {
        RatFun { num, poles }.canonicalize()
    }

    /// `factor^{-k}`.
    pub fn pole(factor: PoleFactor, k: u32) -> Self {
        let mut poles = BTreeMap::new();
        poles.insert(factor, k);
        Self::new(LaurentPoly::one(), poles)
    }

    /// `(a - b)^{-k}`, with the sign carried into the numerator.
    pub fn diff_pole(a: &str, b: &str, k: u32) -> Self {
        let (f, s) = PoleFactor::diff(a, b);
        let sign = if s < 0 && k % 2 == 1 { -1 } else { 1 };
        let mut poles = BTreeMap::new();
        poles.insert(f, k);
        Self::new(LaurentPoly::constant(int(sign)), poles)
    }

    pub fn numerator(&self) -> &LaurentPoly {
        &self.num
    }

    pub fn poles(&self) -> &BTreeMap<PoleFactor, u32> {
        &self.poles
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Every variable mentioned by the numerator or a pole.
    pub fn vars(&self) -> Vec<String> {
        let mut v = self.num.support_vars();
        for f in self.poles.keys() {
            v.extend(f.vars());
        }
        sort_vars(&mut v);
        v
    }

    pub fn canonicalize(self) -> Self {
        let RatFun { num, mut poles } = self;
        poles.retain(|_, k| *k > 0);
        let mut num = num.trimmed();
        if num.is_zero() {
            return RatFun::zero();
        }

        // Var poles: move negative exponents into the denominator and cancel
        // against positive ones.
        let mut var_names: BTreeSet<String> = num.vars.iter().cloned().collect();
        for f in poles.keys() {
            if let PoleFactor::Var(v) = f {
                var_names.insert(v.clone());
            }
        }
        for v in var_names {
            let f = PoleFactor::Var(v.clone());
            let p = poles.get(&f).copied().unwrap_or(0) as i64;
            let e = num.min_exponent(&v).unwrap_or(0);
            let net = e - p;
            let shift = if net >= 0 { -p } else { -e };
            if shift != 0 {
                num = num.shift(&[(v.as_str(), shift)]);
            }
            if net >= 0 {
                poles.remove(&f);
            } else {
                poles.insert(f, (-net) as u32);
            }
        }
        num = num.trimmed();

        let linear: Vec<PoleFactor> = poles
            .keys()
            .filter(|f| !matches!(f, PoleFactor::Var(_)))
            .cloned()
            .collect();
        for f in linear {
            let mut k = poles[&f];
            while k > 0 {
                match divide_linear(&num, &f) {
                    Some(q) => {
                        num = q;
                        k -= 1;
                    }
                    None => break,
                }
            }
            if k == 0 {
                poles.remove(&f);
            } else {
                poles.insert(f, k);
            }
        }
        RatFun {
            num: num.trimmed(),
            poles,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let mut poles = self.poles.clone();
        for (f, k) in &other.poles {
            let e = poles.entry(f.clone()).or_insert(0);
            *e = (*e).max(*k);
        }
        let lift = |r: &RatFun| {
            let mut n = r.num.clone();
            for (f, k) in &poles {
                let have = r.poles.get(f).copied().unwrap_or(0);
                if *k > have {
                    n = n.mul(&f.poly().pow(k - have));
                }
            }
            n
        };
        let num = lift(self).add(&lift(other));
        RatFun { num, poles }.canonicalize()
    }

    pub fn neg(&self) -> Self {
        RatFun {
            num: self.num.scale(&-Scalar::one()),
            poles: self.poles.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return RatFun::zero();
        }
        let mut poles = self.poles.clone();
        for (f, k) in &other.poles {
            *poles.entry(f.clone()).or_insert(0) += k;
        }
        RatFun {
            num: self.num.mul(&other.num),
            poles,
        }
        .canonicalize()
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        if c.is_zero() {
            return RatFun::zero();
        }
        RatFun {
            num: self.num.scale(c),
            poles: self.poles.clone(),
        }
    }

    /// Pole locus is contained in `{z_i = 0, z_i = z_j}`.
    pub fn poles_are_admissible(&self) -> bool {
        self.poles
            .keys()
            .all(|f| matches!(f, PoleFactor::Var(_) | PoleFactor::Diff(..)))
    }

    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let n = self.num.render();
        if self.poles.is_empty() {
            return n;
        }
        let n = if self.num.len() > 1 { format!("({n})") } else { n };
        let d: Vec<String> = self
            .poles
            .iter()
            .map(|(f, k)| format!("{}^{k}", f.render()))
            .collect();
        format!("{n} / ({})", d.join(" * "))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "numerator": self.num.to_json(),
            "poles": self.poles.iter().map(|(f, k)| {
                let kind = match f {
                    PoleFactor::Var(_) => "var",
                    PoleFactor::Diff(..) => "diff",
                    PoleFactor::Sum(..) => "sum",
                };
                json!({"kind": kind, "vars": f.vars(), "exponent": k})
            }).collect::<Vec<_>>(),
        })
    }
}

impl std::fmt::Display for RatFun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}

/// Exact equality of rational functions.
pub fn ratfun_eq(lhs: &RatFun, rhs: &RatFun) -> bool {
    lhs.sub(rhs).is_zero()
}

/// Exact quotient of a polynomial by `a - b` or `a + b`, if it exists.
fn divide_linear(num: &LaurentPoly, f: &PoleFactor) -> Option<LaurentPoly> {
    let (a, b, root_sign) = match f {
        PoleFactor::Diff(a, b) => (a, b, Scalar::one()),
        PoleFactor::Sum(a, b) => (a, b, -Scalar::one()),
        PoleFactor::Var(_) => unreachable!(),
    };
    if num.is_zero() {
        return Some(num.clone());
    }
    let vars = union_vars(&num.vars, &[a.clone(), b.clone()]);
    let p = num.with_vars(&vars);
    let ia = vars.iter().position(|v| v == a).unwrap();
    let ib = vars.iter().position(|v| v == b).unwrap();

    // coefficients of a^k as polynomials in the remaining variables
    let mut by_deg: BTreeMap<i64, BTreeMap<Vec<i64>, Scalar>> = BTreeMap::new();
    for (e, c) in &p.terms {
        if e[ia] < 0 {
            return None;
        }
        let mut rest = e.clone();
        rest[ia] = 0;
        by_deg.entry(e[ia]).or_default().insert(rest, c.clone());
    }
    let deg = *by_deg.keys().next_back().unwrap();
    if deg == 0 {
        return None;
    }
    // multiply by the root r = root_sign * b
    let times_root = |q: &BTreeMap<Vec<i64>, Scalar>| -> BTreeMap<Vec<i64>, Scalar> {
        q.iter()
            .map(|(e, c)| {
                let mut e = e.clone();
                e[ib] += 1;
                (e, c * &root_sign)
            })
            .collect()
    };
    let add = |x: &mut BTreeMap<Vec<i64>, Scalar>, y: BTreeMap<Vec<i64>, Scalar>| {
        for (e, c) in y {
            let v = x.entry(e.clone()).or_insert_with(Scalar::zero);
            *v += c;
            if v.is_zero() {
                x.remove(&e);
            }
        }
    };
    let mut quot: BTreeMap<i64, BTreeMap<Vec<i64>, Scalar>> = BTreeMap::new();
    let mut carry = by_deg.get(&deg).cloned().unwrap_or_default();
    for k in (1..deg).rev() {
        quot.insert(k, carry.clone());
        let mut next = by_deg.get(&k).cloned().unwrap_or_default();
        add(&mut next, times_root(&carry));
        carry = next;
    }
    quot.insert(0, carry.clone());
    let mut rem = by_deg.get(&0).cloned().unwrap_or_default();
    add(&mut rem, times_root(&carry));
    if !rem.is_empty() {
        return None;
    }
    let mut out = LaurentPoly {
        vars,
        terms: BTreeMap::new(),
    };
    for (k, q) in quot {
        for (mut e, c) in q {
            e[ia] = k;
            out.add_term(e, c);
        }
    }
    Some(out)
}

/// Region of convergence for an iterated Laurent expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    /// `|v_0| > |v_1| > ... > 0`.
    Ordered(Vec<String>),
    /// `|base| > |offset| > 0`, the coordinates of the iterate region.
    Iterate { base: String, offset: String },
}

impl Region {
    pub fn ordered<S: AsRef<str>>(vars: &[S]) -> Self {
        Region::Ordered(vars.iter().map(|s| s.as_ref().to_string()).collect())
    }

    fn ordering(&self) -> Vec<String> {
        match self {
            Region::Ordered(v) => v.clone(),
            Region::Iterate { base, offset } => vec![base.clone(), offset.clone()],
        }
    }
}

/// Inclusive exponent bounds per variable.
pub type Window = BTreeMap<String, (i64, i64)>;

pub fn window<S: AsRef<str>>(bounds: &[(S, i64, i64)]) -> Window {
    bounds
        .iter()
        .map(|(v, lo, hi)| (v.as_ref().to_string(), (*lo, *hi)))
        .collect()
}

struct Series {
    big: usize,
    small: usize,
    n: u32,
    tmax: i64,
    kind: SeriesKind,
}

enum SeriesKind {
    /// `(big - small)^{-n}`
    Diff,
    /// `(small - big)^{-n}`
    RevDiff,
    /// `(big + small)^{-n}`
    Sum,
}

impl Series {
    fn coeff(&self, t: i64) -> Scalar {
        let c = binom_q(self.n as i64 + t - 1, t as u32);
        let neg = match self.kind {
            SeriesKind::Diff => false,
            SeriesKind::RevDiff => self.n % 2 == 1,
            SeriesKind::Sum => t % 2 == 1,
        };
        if neg {
            -c
        } else {
            c
        }
    }
}

/// Iterated Laurent expansion of `r` in `region`, truncated to `window`.
pub fn expand_in_region(r: &RatFun, region: &Region, window: &Window) -> Result<LaurentPoly> {
    for (v, (lo, hi)) in window {
        if lo > hi {
            return Err(Error::InvalidWindow {
                var: v.clone(),
                lo: *lo,
                hi: *hi,
            });
        }
    }
    let order = region.ordering();
    let vars = r.vars();
    for v in &vars {
        if !order.contains(v) {
            return Err(Error::VariableNotInRegion(v.clone()));
        }
        if !window.contains_key(v) {
            return Err(Error::WindowMissingVariable(v.clone()));
        }
    }
    if r.is_zero() {
        return Ok(LaurentPoly::zero());
    }
    // window variables that r does not mention sit at exponent 0
    for (v, (lo, hi)) in window {
        if !vars.contains(v) && (*lo > 0 || *hi < 0) {
            return Ok(LaurentPoly::zero());
        }
    }
    let nv = vars.len();
    let idx = |name: &str| vars.iter().position(|v| v == name).unwrap();
    let rank = |name: &str| order.iter().position(|v| v == name).unwrap();
    let lo: Vec<i64> = vars.iter().map(|v| window[v].0).collect();
    let hi: Vec<i64> = vars.iter().map(|v| window[v].1).collect();

    let mut base = r.num.with_vars(&vars);
    let mut series = Vec::new();
    for (f, k) in &r.poles {
        match f {
            PoleFactor::Var(v) => {
                base = base.shift(&[(v.as_str(), -(*k as i64))]).with_vars(&vars);
            }
            PoleFactor::Diff(a, b) | PoleFactor::Sum(a, b) => {
                let a_big = rank(a) < rank(b);
                let (big, small) = if a_big { (a, b) } else { (b, a) };
                let kind = match (f, a_big) {
                    (PoleFactor::Sum(..), _) => SeriesKind::Sum,
                    (_, true) => SeriesKind::Diff,
                    (_, false) => SeriesKind::RevDiff,
                };
                series.push(Series {
                    big: idx(big),
                    small: idx(small),
                    n: *k,
                    tmax: 0,
                    kind,
                });
            }
        }
    }

    // Bound the summation index of each series, smallest variable first.
    let mut base_min: Vec<i64> = (0..nv)
        .map(|i| base.terms.keys().map(|e| e[i]).min().unwrap_or(0))
        .collect();
    for s in &series {
        base_min[s.big] -= s.n as i64;
    }
    let mut by_rank: Vec<usize> = (0..nv).collect();
    by_rank.sort_by_key(|&i| std::cmp::Reverse(rank(&vars[i])));
    for &v in &by_rank {
        let big_slack: i64 = series.iter().filter(|s| s.big == v).map(|s| s.tmax).sum();
        let bound = hi[v] - base_min[v] + big_slack;
        if bound < 0 && series.iter().any(|s| s.small == v) {
            return Ok(LaurentPoly::zero());
        }
        for s in series.iter_mut().filter(|s| s.small == v) {
            s.tmax = bound;
        }
    }

    // suffix ranges of exponent deltas contributed by the remaining series
    let mut suf_min = vec![vec![0i64; nv]; series.len() + 1];
    let mut suf_max = vec![vec![0i64; nv]; series.len() + 1];
    for j in (0..series.len()).rev() {
        let s = &series[j];
        suf_min[j] = suf_min[j + 1].clone();
        suf_max[j] = suf_max[j + 1].clone();
        suf_min[j][s.big] += -(s.n as i64) - s.tmax;
        suf_max[j][s.big] += -(s.n as i64);
        suf_max[j][s.small] += s.tmax;
    }
    let reachable = |e: &[i64], j: usize| {
        (0..nv).all(|i| e[i] + suf_min[j][i] <= hi[i] && e[i] + suf_max[j][i] >= lo[i])
    };

    let mut cur: BTreeMap<Vec<i64>, Scalar> = base
        .terms
        .into_iter()
        .filter(|(e, _)| reachable(e, 0))
        .collect();
    for (j, s) in series.iter().enumerate() {
        let coeffs: Vec<Scalar> = (0..=s.tmax).map(|t| s.coeff(t)).collect();
        let mut next: BTreeMap<Vec<i64>, Scalar> = BTreeMap::new();
        for (e, c) in &cur {
            for (t, ct) in coeffs.iter().enumerate() {
                let mut e2 = e.clone();
                e2[s.big] -= s.n as i64 + t as i64;
                e2[s.small] += t as i64;
                if !reachable(&e2, j + 1) {
                    continue;
                }
                let v = next.entry(e2).or_insert_with(Scalar::zero);
                *v += c * ct;
            }
        }
        next.retain(|_, c| !c.is_zero());
        cur = next;
    }
    let mut out = LaurentPoly {
        vars: vars.clone(),
        terms: BTreeMap::new(),
    };
    for (e, c) in cur {
        if (0..nv).all(|i| lo[i] <= e[i] && e[i] <= hi[i]) {
            out.add_term(e, c);
        }
    }
    Ok(out)
}

/// Determinant of a small integer matrix, exactly.
fn det(rows: Vec<Vec<Scalar>>) -> Scalar {
    let n = rows.len();
    let mut m = rows;
    let mut d = Scalar::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Scalar::zero();
        };
        if p != col {
            m.swap(p, col);
            d = -d;
        }
        let piv = m[col][col].clone();
        d *= &piv;
        for r in col + 1..n {
            let f = &m[r][col] / &piv;
            if f.is_zero() {
                continue;
            }
            for c in col..n {
                let x = &m[col][c] * &f;
                m[r][c] -= x;
            }
        }
    }
    d
}

/// Rewrites `r` under the linear change of variables `v -> map[v]`.
/// Variables of `r` missing from `map` are kept as they are.
pub fn substitute_vars(r: &RatFun, map: &BTreeMap<String, LinearForm>) -> Result<RatFun> {
    let sources: Vec<&String> = map.keys().collect();
    let mut targets: Vec<String> = map
        .values()
        .flat_map(|f| f.iter().filter(|(_, c)| **c != 0).map(|(v, _)| v.clone()))
        .collect();
    sort_vars(&mut targets);
    if targets.len() != sources.len() {
        return Err(Error::NonInvertibleSubstitution(format!(
            "{} source variables map onto {} target variables",
            sources.len(),
            targets.len()
        )));
    }
    let rows: Vec<Vec<Scalar>> = sources
        .iter()
        .map(|s| {
            targets
                .iter()
                .map(|t| int(map[*s].get(t).copied().unwrap_or(0)))
                .collect()
        })
        .collect();
    if det(rows).is_zero() {
        return Err(Error::NonInvertibleSubstitution(
            "linear map has zero determinant".into(),
        ));
    }
    let image = |v: &str| -> LinearForm {
        match map.get(v) {
            Some(f) => f.clone(),
            None => [(v.to_string(), 1)].into_iter().collect(),
        }
    };
    for v in r.vars() {
        if !map.contains_key(&v) && targets.contains(&v) {
            return Err(Error::NonInvertibleSubstitution(format!(
                "unmapped variable `{v}` collides with a target variable"
            )));
        }
    }
    let form_poly = |f: &LinearForm| -> LaurentPoly {
        let mut p = LaurentPoly::zero();
        for (v, c) in f {
            p = p.add(&LaurentPoly::var(v).scale(&int(*c)));
        }
        p
    };

    let mut num = LaurentPoly::zero();
    let src = &r.num;
    let images: Vec<LaurentPoly> = src.vars.iter().map(|v| form_poly(&image(v))).collect();
    for (e, c) in &src.terms {
        let mut t = LaurentPoly::constant(c.clone());
        for (i, k) in e.iter().enumerate() {
            if *k < 0 {
                return Err(Error::NonInvertibleSubstitution(
                    "numerator is not polynomial".into(),
                ));
            }
            t = t.mul(&images[i].pow(*k as u32));
        }
        num = num.add(&t);
    }
    let mut poles = BTreeMap::new();
    for (f, k) in &r.poles {
        let mut lf = LinearForm::new();
        for (v, c) in f.linear_form() {
            for (w, d) in image(&v) {
                *lf.entry(w).or_insert(0) += c * d;
            }
        }
        let (g, c) = classify_linear_form(&lf)?;
        if c != 1 {
            let inv = Scalar::one() / int(c);
            let mut s = Scalar::one();
            for _ in 0..*k {
                s *= &inv;
            }
            num = num.scale(&s);
        }
        *poles.entry(g).or_insert(0) += k;
    }
    Ok(RatFun::new(num, poles))
}

/// `z1 -> x2 + x0, z2 -> x2` style map for the iterate region.
pub fn iterate_substitution(z1: &str, z2: &str, x0: &str, x2: &str) -> BTreeMap<String, LinearForm> {
    let mut m = BTreeMap::new();
    m.insert(
        z1.to_string(),
        [(x2.to_string(), 1), (x0.to_string(), 1)].into_iter().collect(),
    );
    m.insert(z2.to_string(), [(x2.to_string(), 1)].into_iter().collect());
    m
}

/// Inverse of [`iterate_substitution`].
pub fn iterate_substitution_inverse(
    z1: &str,
    z2: &str,
    x0: &str,
    x2: &str,
) -> BTreeMap<String, LinearForm> {
    let mut m = BTreeMap::new();
    m.insert(
        x0.to_string(),
        [(z1.to_string(), 1), (z2.to_string(), -1)].into_iter().collect(),
    );
    m.insert(x2.to_string(), [(z2.to_string(), 1)].into_iter().collect());
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use proptest::prelude::*;

    fn z(i: u32) -> String {
        format!("z{i}")
    }

    fn p(vars: &[&str], terms: &[(&[i64], i64)]) -> LaurentPoly {
        LaurentPoly::from_terms(vars, terms.iter().map(|(e, c)| (*e, int(*c))))
    }

    fn rf(num: LaurentPoly, poles: &[(PoleFactor, u32)]) -> RatFun {
        RatFun::new(num, poles.iter().cloned().collect())
    }

    fn d12() -> PoleFactor {
        PoleFactor::Diff(z(1), z(2))
    }

    #[test]
    fn variable_order_is_numeric() {
        assert_eq!(cmp_vars("z2", "z10"), Ordering::Less);
        assert_eq!(cmp_vars("x0", "x2"), Ordering::Less);
        assert_eq!(cmp_vars("x9", "z1"), Ordering::Less);
    }

    #[test]
    fn product_adds_exponents() {
        let a = RatFun::pole(d12(), 1);
        assert_eq!(a.mul(&a), RatFun::pole(d12(), 2));
    }

    #[test]
    fn zero_is_additive_identity() {
        let a = RatFun::pole(d12(), 3);
        assert_eq!(a.add(&RatFun::zero()), a);
    }

    #[test]
    fn sum_of_two_poles() {
        // cross-multiplied by hand: 1/(z1-z2) + 1/z1 = (2 z1 - z2) / (z1 (z1-z2))
        let s = RatFun::pole(d12(), 1).add(&RatFun::pole(PoleFactor::Var(z(1)), 1));
        let expect = rf(
            p(&["z1", "z2"], &[(&[1, 0], 2), (&[0, 1], -1)]),
            &[(PoleFactor::Var(z(1)), 1), (d12(), 1)],
        );
        assert_eq!(s, expect);
        assert_eq!(s.render(), "(2*z1 - z2) / (z1^1 * (z1 - z2)^1)");
    }

    #[test]
    fn cancellation_of_common_factor() {
        let r = rf(
            p(&["z1", "z2"], &[(&[1, 0], 1), (&[0, 1], -1)]),
            &[(d12(), 2)],
        );
        assert_eq!(r, RatFun::pole(d12(), 1));
        let zero = rf(LaurentPoly::zero(), &[(PoleFactor::Var(z(1)), 2)]);
        assert!(zero.is_zero());
        assert!(zero.poles().is_empty());
    }

    #[test]
    fn division_oracle_case() {
        // z1 z2 - z2^2 = z2 (z1 - z2)
        let r = rf(
            p(&["z1", "z2"], &[(&[1, 1], 1), (&[0, 2], -1)]),
            &[(d12(), 2)],
        );
        let expect = rf(LaurentPoly::var("z2"), &[(d12(), 1)]);
        assert_eq!(r, expect);
        assert_eq!(r.numerator(), &LaurentPoly::var("z2"));
    }

    #[test]
    fn equality_cases() {
        assert!(ratfun_eq(&RatFun::pole(d12(), 2), &RatFun::pole(d12(), 2)));
        assert!(!ratfun_eq(
            &RatFun::diff_pole("z1", "z2", 1),
            &RatFun::diff_pole("z2", "z1", 1)
        ));
        let lhs = rf(
            p(&["z1", "z2"], &[(&[2, 0], 1), (&[0, 2], -1)]),
            &[(d12(), 1)],
        );
        let rhs = RatFun::from_poly(p(&["z1", "z2"], &[(&[1, 0], 1), (&[0, 1], 1)]));
        assert!(ratfun_eq(&lhs, &rhs));
    }

    #[test]
    fn sign_convention() {
        let (f, s) = PoleFactor::diff("z2", "z1");
        assert_eq!(f, d12());
        assert_eq!(s, -1);
        let r = RatFun::diff_pole("z2", "z1", 1);
        assert_eq!(r, RatFun::pole(d12(), 1).neg());
        assert_eq!(RatFun::diff_pole("z2", "z1", 2), RatFun::pole(d12(), 2));
    }

    #[test]
    fn binomial_expansion_in_window() {
        let r = RatFun::pole(d12(), 2);
        let w = window(&[("z1", -4, -2), ("z2", 0, 2)]);
        let e = expand_in_region(&r, &Region::ordered(&["z1", "z2"]), &w).unwrap();
        let expect = p(
            &["z1", "z2"],
            &[(&[-2, 0], 1), (&[-3, 1], 2), (&[-4, 2], 3)],
        );
        assert_eq!(e, expect);
    }

    #[test]
    fn expansion_of_simple_pole_is_itself() {
        let r = RatFun::pole(PoleFactor::Var(z(1)), 1);
        for region in [Region::ordered(&["z1", "z2"]), Region::ordered(&["z2", "z1"])] {
            let e = expand_in_region(&r, &region, &window(&[("z1", -5, 5), ("z2", -5, 5)]))
                .unwrap();
            assert_eq!(e, LaurentPoly::monomial(&[("z1", -1)], Scalar::one()));
        }
    }

    #[test]
    fn expansion_errors() {
        let r = RatFun::pole(d12(), 1);
        assert_eq!(
            expand_in_region(&r, &Region::ordered(&["z1"]), &window(&[("z1", 0, 1), ("z2", 0, 1)])),
            Err(Error::VariableNotInRegion("z2".into()))
        );
        assert_eq!(
            expand_in_region(&r, &Region::ordered(&["z1", "z2"]), &window(&[("z1", 0, 1)])),
            Err(Error::WindowMissingVariable("z2".into()))
        );
    }

    #[test]
    fn iterate_coordinates() {
        let sub = iterate_substitution("z1", "z2", "x0", "x2");
        let r = substitute_vars(&RatFun::pole(d12(), 2), &sub).unwrap();
        assert_eq!(r, RatFun::pole(PoleFactor::Var("x0".into()), 2));

        let r = substitute_vars(&RatFun::pole(d12(), 1), &sub).unwrap();
        let e = expand_in_region(
            &r,
            &Region::Iterate {
                base: "x2".into(),
                offset: "x0".into(),
            },
            &window(&[("x0", -3, 3), ("x2", -3, 3)]),
        )
        .unwrap();
        assert_eq!(e, LaurentPoly::monomial(&[("x0", -1)], Scalar::one()));

        let inv = iterate_substitution_inverse("z1", "z2", "x0", "x2");
        let r = RatFun::pole(PoleFactor::Var("x0".into()), 1)
            .mul(&RatFun::pole(PoleFactor::Var("x2".into()), 1));
        let back = substitute_vars(&r, &inv).unwrap();
        assert_eq!(
            back,
            RatFun::pole(d12(), 1).mul(&RatFun::pole(PoleFactor::Var(z(2)), 1))
        );
    }

    #[test]
    fn shifted_pole_matches_geometric_series() {
        let sub = iterate_substitution("z1", "z2", "x0", "x2");
        let r = substitute_vars(&RatFun::pole(PoleFactor::Var(z(1)), 1), &sub).unwrap();
        assert_eq!(
            r.poles().keys().next(),
            Some(&PoleFactor::Sum("x0".into(), "x2".into()))
        );
        let e = expand_in_region(
            &r,
            &Region::ordered(&["x2", "x0"]),
            &window(&[("x0", 0, 6), ("x2", -10, 0)]),
        )
        .unwrap();
        // 1/(x2 + x0) = sum_t (-1)^t x2^{-1-t} x0^t
        let mut oracle = LaurentPoly::zero();
        for t in 0..=6i64 {
            let c = if t % 2 == 0 { 1 } else { -1 };
            oracle = oracle.add(&LaurentPoly::monomial(&[("x2", -1 - t), ("x0", t)], int(c)));
        }
        assert_eq!(e, oracle);
    }

    #[test]
    fn non_invertible_substitution() {
        let mut m = BTreeMap::new();
        m.insert("z1".to_string(), [("x".to_string(), 1)].into_iter().collect());
        m.insert("z2".to_string(), [("x".to_string(), 2)].into_iter().collect());
        assert!(matches!(
            substitute_vars(&RatFun::pole(d12(), 1), &m),
            Err(Error::NonInvertibleSubstitution(_))
        ));
        let mut m = BTreeMap::new();
        m.insert(
            "z1".to_string(),
            [("x".to_string(), 1), ("y".to_string(), 1)].into_iter().collect(),
        );
        m.insert(
            "z2".to_string(),
            [("x".to_string(), 1), ("y".to_string(), -1)].into_iter().collect(),
        );
        // z1 - z2 -> 2y, z1 -> x + y; both classify
        let r = substitute_vars(&RatFun::pole(d12(), 1), &m).unwrap();
        assert_eq!(r, RatFun::pole(PoleFactor::Var("y".into()), 1).scale(&ratio(1, 2)));
    }

    #[test]
    fn rendering() {
        assert_eq!(RatFun::pole(d12(), 2).render(), "1 / ((z1 - z2)^2)");
        assert_eq!(RatFun::zero().render(), "0");
        assert_eq!(RatFun::constant(ratio(-3, 4)).render(), "-3/4");
        let q = p(&["z1", "z2"], &[(&[0, 2], 1), (&[2, 0], -1), (&[1, 0], 3)]);
        assert_eq!(q.render(), "-z1^2 + z2^2 + 3*z1");
        let j = RatFun::pole(d12(), 2).to_json();
        assert_eq!(j["poles"][0]["kind"], "diff");
        assert_eq!(j["numerator"]["terms"][0]["coeff"], "1/1");
    }

    fn arb_ratfun() -> impl Strategy<Value = RatFun> {
        let term = (
            prop::collection::vec(-1i64..3, 3),
            -3i64..4,
        );
        (
            prop::collection::vec(term, 0..4),
            prop::collection::vec(0u32..3, 6),
        )
            .prop_map(|(terms, ex)| {
                let vars = ["z1", "z2", "z3"];
                let num = LaurentPoly::from_terms(
                    &vars,
                    terms.iter().map(|(e, c)| (e.as_slice(), int(*c))),
                );
                let factors = [
                    PoleFactor::Var("z1".into()),
                    PoleFactor::Var("z2".into()),
                    PoleFactor::Var("z3".into()),
                    PoleFactor::Diff("z1".into(), "z2".into()),
                    PoleFactor::Diff("z1".into(), "z3".into()),
                    PoleFactor::Diff("z2".into(), "z3".into()),
                ];
                let poles = factors.into_iter().zip(ex).filter(|(_, k)| *k > 0).collect();
                RatFun::new(num, poles)
            })
    }

    fn big_window() -> Window {
        window(&[("z1", -8, 2), ("z2", -3, 3), ("z3", -2, 4)])
    }

    fn region() -> Region {
        Region::ordered(&["z1", "z2", "z3"])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn canonical_form_is_idempotent(r in arb_ratfun()) {
            prop_assert_eq!(r.clone().canonicalize(), r);
        }

        #[test]
        fn equality_is_reflexive_and_symmetric(r in arb_ratfun(), s in arb_ratfun()) {
            prop_assert!(ratfun_eq(&r, &r));
            prop_assert_eq!(ratfun_eq(&r, &s), ratfun_eq(&s, &r));
            let t = r.add(&s).sub(&s);
            prop_assert!(ratfun_eq(&t, &r));
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn expansion_is_multiplicative(r in arb_ratfun(), s in arb_ratfun()) {
            // every expansion of this family is supported where e3 >= -3,
            // e2 + e3 >= -8 and total degree lies in [-15, 6]
            let wide = window(&[("z1", -30, 14), ("z2", -15, 18), ("z3", -3, 7)]);
            let er = expand_in_region(&r, &region(), &wide).unwrap();
            let es = expand_in_region(&s, &region(), &wide).unwrap();
            let lhs = expand_in_region(&r.mul(&s), &region(), &big_window()).unwrap();
            let rhs = er.mul(&es).restrict(&big_window());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn expansion_is_additive(r in arb_ratfun(), s in arb_ratfun()) {
            let w = big_window();
            let lhs = expand_in_region(&r.add(&s), &region(), &w).unwrap();
            let rhs = expand_in_region(&r, &region(), &w).unwrap()
                .add(&expand_in_region(&s, &region(), &w).unwrap());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn diff_sign_round_trip(k in 1u32..5) {
            let a = RatFun::diff_pole("z2", "z1", k);
            let b = RatFun::diff_pole("z1", "z2", k);
            let sign = if k % 2 == 1 { -1 } else { 1 };
            prop_assert_eq!(a.clone(), b.scale(&int(sign)));
            prop_assert_eq!(a.scale(&int(sign)).scale(&int(sign)), a);
        }
    }
}
