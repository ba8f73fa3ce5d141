//! Sparse multivariate polynomials over positionally indexed variables.
//!
//! Variable names live outside the polynomial (see [`VarTable`]); a polynomial
//! only knows how many variables it ranges over.

use std::collections::BTreeMap;
use std::fmt;

use super::interval::Interval;
use super::ModelError;

/// Exponent vector, one entry per variable.
pub type Exps = Vec<u32>;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Exps, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The polynomial `v_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(
            i < nvars,
            "variable index {i} out of range for {nvars} variables"
        );
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    pub fn monomial(exps: Exps, coeff: f64) -> Self {
        let mut p = Self::zero(exps.len());
        p.add_term(exps, coeff);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Exps, f64)>) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    /// Adds `coeff * mono(exps)`, dropping the term if it cancels to zero.
    pub fn add_term(&mut self, exps: Exps, coeff: f64) {
        assert_eq!(exps.len(), self.nvars, "exponent vector has wrong arity");
        if coeff == 0.0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exps) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exps, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    /// True if variable `i` appears with a positive exponent.
    pub fn uses_var(&self, i: usize) -> bool {
        self.terms.keys().any(|e| e[i] > 0)
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, ModelError> {
        if let Some(i) = (point.len()..self.nvars).find(|&i| self.uses_var(i)) {
            return Err(ModelError::UnboundVariable(format!("v{i}")));
        }
        Ok(self.eval_unchecked(point))
    }

    /// Evaluation without arity checks. Variables past the end of `point`
    /// must not occur in the polynomial.
    pub fn eval_unchecked(&self, point: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t *= point[i].powi(k as i32);
                }
            }
            acc += t;
        }
        acc
    }

    /// Sum of absolute term values at a point, a yardstick for rounding error.
    pub fn abs_eval(&self, point: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = c.abs();
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t *= point[i].abs().powi(k as i32);
                }
            }
            acc += t;
        }
        acc
    }

    /// Naive term-wise enclosure. Powers are formed by repeated interval
    /// multiplication, so `x^2` over `[-1,2]` yields `[-2,4]`.
    pub fn interval_eval(&self, b: &[Interval]) -> Interval {
        let mut acc = Interval::point(0.0);
        for (e, c) in &self.terms {
            let mut t = Interval::point(*c);
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    t = t.mul(b[i]);
                }
            }
            acc = acc.add(t);
        }
        acc
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars);
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(e.clone(), *c);
        }
        p
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), c * s))
                .filter(|(_, c)| *c != 0.0)
                .collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Polynomial {
        let mut p = self.clone();
        p.add_term(vec![0; self.nvars], c);
        p
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars);
        let mut p = Polynomial::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Exps = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Substitutes variable `i` by `subs[i]`. All substitutes must share an arity,
    /// which becomes the arity of the result.
    pub fn compose(&self, subs: &[Polynomial]) -> Polynomial {
        assert_eq!(
            subs.len(),
            self.nvars,
            "compose needs one substitute per variable"
        );
        let out_vars = subs.first().map(|p| p.nvars).unwrap_or(0);
        // cache powers per variable
        let maxdeg: Vec<u32> = (0..self.nvars)
            .map(|i| self.terms.keys().map(|e| e[i]).max().unwrap_or(0))
            .collect();
        let powers: Vec<Vec<Polynomial>> = subs
            .iter()
            .zip(&maxdeg)
            .map(|(s, &d)| {
                let mut v = vec![Polynomial::constant(out_vars, 1.0)];
                for k in 1..=d as usize {
                    let next = v[k - 1].mul(s);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut acc = Polynomial::zero(out_vars);
        for (e, c) in &self.terms {
            let mut t = Polynomial::constant(out_vars, *c);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t.mul(&powers[i][k as usize]);
                }
            }
            acc = acc.add(&t);
        }
        acc
    }

    /// Re-indexes variables: old variable `i` becomes `map[i]` in a space of `nvars` variables.
    pub fn remap(&self, nvars: usize, map: &[usize]) -> Polynomial {
        assert_eq!(map.len(), self.nvars);
        let mut p = Polynomial::zero(nvars);
        for (e, c) in &self.terms {
            let mut ne = vec![0; nvars];
            for (i, &k) in e.iter().enumerate() {
                ne[map[i]] += k;
            }
            p.add_term(ne, *c);
        }
        p
    }

    /// Largest absolute difference of coefficients.
    pub fn max_coeff_diff(&self, other: &Polynomial) -> f64 {
        let mut m: f64 = 0.0;
        for (e, c) in &self.terms {
            m = m.max((c - other.coeff(e)).abs());
        }
        for (e, c) in &other.terms {
            m = m.max((c - self.coeff(e)).abs());
        }
        m
    }
}

/// All exponent vectors over `nvars` variables with total degree `<= degree`,
/// in graded order (constant first).
pub fn monomials(nvars: usize, degree: u32) -> Vec<Exps> {
    let mut out = Vec::new();
    for d in 0..=degree {
        let mut cur = vec![0u32; nvars];
        fill(&mut out, &mut cur, 0, d);
    }
    out
}

fn fill(out: &mut Vec<Exps>, cur: &mut Exps, pos: usize, left: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    if cur.is_empty() {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        fill(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

/// Value of one monomial at a point.
pub fn mono_eval(exps: &[u32], point: &[f64]) -> f64 {
    let mut t = 1.0;
    for (i, &k) in exps.iter().enumerate() {
        if k > 0 {
            t *= point[i].powi(k as i32);
        }
    }
    t
}

/// Names for positional variables, with the reverse lookup used by the JSON readers.
#[derive(Debug, Clone, PartialEq)]
pub struct VarTable {
    names: Vec<String>,
    aliases: Vec<(String, usize)>,
}

impl VarTable {
    pub fn new(names: Vec<String>) -> Self {
        VarTable {
            names,
            aliases: Vec::new(),
        }
    }

    pub fn with_alias(mut self, alias: &str, index: usize) -> Self {
        self.aliases.push((alias.to_string(), index));
        self
    }

    /// Variables `x1..xn` then `u1..um`; in one dimension `x` and `u` are accepted too.
    pub fn state_input(n: usize, m: usize) -> Self {
        let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        names.extend((1..=m).map(|i| format!("u{i}")));
        let mut t = VarTable::new(names);
        if n == 1 {
            t = t.with_alias("x", 0);
        }
        if m == 1 {
            t = t.with_alias("u", n);
        }
        t
    }

    /// Variables `x1..xn` then `xh1..xhn` (the shadow copy).
    pub fn pair(n: usize) -> Self {
        let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        names.extend((1..=n).map(|i| format!("xh{i}")));
        let mut t = VarTable::new(names);
        if n == 1 {
            t = t.with_alias("x", 0).with_alias("xh", 1);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name).or_else(|| {
            self.aliases
                .iter()
                .find(|(a, _)| a == name)
                .map(|(_, i)| *i)
        })
    }

    pub fn display<'a>(&'a self, p: &'a Polynomial) -> PolyDisplay<'a> {
        PolyDisplay {
            table: self,
            poly: p,
        }
    }
}

pub struct PolyDisplay<'a> {
    table: &'a VarTable,
    poly: &'a Polynomial,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.poly.terms() {
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            write!(f, "{}", c.abs())?;
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*{}", self.table.name(i))?,
                    _ => write!(f, "*{}^{}", self.table.name(i), k)?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_sum_of_square() {
        // x1 + x2^2 at (2,3)
        let p = Polynomial::var(2, 0).add(&Polynomial::var(2, 1).pow(2));
        assert_eq!(p.eval(&[2.0, 3.0]).unwrap(), 11.0);
    }

    #[test]
    fn unbound_variable_is_named() {
        let p = Polynomial::var(2, 1);
        let err = p.eval(&[1.0]).unwrap_err();
        assert!(err.to_string().contains("v1"), "{err}");
    }

    #[test]
    fn cancellation_drops_terms() {
        let x = Polynomial::var(1, 0);
        assert!(x.sub(&x).is_zero());
        assert_eq!(x.sub(&x).num_terms(), 0);
    }

    #[test]
    fn compose_substitutes() {
        // p(a,b) = a*b, a := y+1, b := y-1  => y^2 - 1
        let p = Polynomial::var(2, 0).mul(&Polynomial::var(2, 1));
        let y = Polynomial::var(1, 0);
        let q = p.compose(&[y.add_constant(1.0), y.add_constant(-1.0)]);
        assert_eq!(q.coeff(&[2]), 1.0);
        assert_eq!(q.coeff(&[0]), -1.0);
        assert_eq!(q.num_terms(), 2);
    }

    #[test]
    fn monomial_count_matches_binomial() {
        // C(n+d, d)
        assert_eq!(monomials(2, 3).len(), 10);
        assert_eq!(monomials(4, 2).len(), 15);
        assert_eq!(monomials(1, 0), vec![vec![0]]);
        assert_eq!(monomials(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn remap_moves_variables() {
        let p = Polynomial::var(1, 0).pow(2);
        let q = p.remap(3, &[2]);
        assert_eq!(q.eval(&[0.0, 0.0, 3.0]).unwrap(), 9.0);
    }

    #[test]
    fn naive_square_enclosure() {
        let p = Polynomial::var(1, 0).pow(2);
        let r = p.interval_eval(&[Interval::new(-1.0, 2.0)]);
        assert!(r.lo <= -2.0 && r.lo > -2.0 - 1e-12);
        assert!(r.hi >= 4.0 && r.hi < 4.0 + 1e-12);
    }
}
