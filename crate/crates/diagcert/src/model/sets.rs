use serde::{Deserialize, Serialize};

use super::interval::Interval;
use super::poly::Polynomial;

/// Sign condition of a polynomial against zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rel {
    #[serde(rename = ">=0")]
    Ge,
    #[serde(rename = ">0")]
    Gt,
    #[serde(rename = "<=0")]
    Le,
    #[serde(rename = "<0")]
    Lt,
}

impl Rel {
    pub fn holds(self, v: f64) -> bool {
        match self {
            Rel::Ge => v >= 0.0,
            Rel::Gt => v > 0.0,
            Rel::Le => v <= 0.0,
            Rel::Lt => v < 0.0,
        }
    }

    /// The relation satisfied exactly where `self` fails.
    pub fn negate(self) -> Rel {
        match self {
            Rel::Ge => Rel::Lt,
            Rel::Gt => Rel::Le,
            Rel::Le => Rel::Gt,
            Rel::Lt => Rel::Ge,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Rel::Gt | Rel::Lt)
    }

    /// Three-valued test of an enclosure: `Some(true)` if every value satisfies
    /// the relation, `Some(false)` if none does.
    pub fn decide(self, iv: Interval) -> Option<bool> {
        let (all, none) = match self {
            Rel::Ge => (iv.lo >= 0.0, iv.hi < 0.0),
            Rel::Gt => (iv.lo > 0.0, iv.hi <= 0.0),
            Rel::Le => (iv.hi <= 0.0, iv.lo > 0.0),
            Rel::Lt => (iv.hi < 0.0, iv.lo >= 0.0),
        };
        if all {
            Some(true)
        } else if none {
            Some(false)
        } else {
            None
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Ge => ">= 0",
            Rel::Gt => "> 0",
            Rel::Le => "<= 0",
            Rel::Lt => "< 0",
        }
    }
}

/// Axis-aligned closed box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    pub ivs: Vec<Interval>,
}

impl BoxSet {
    pub fn new(ivs: Vec<Interval>) -> Self {
        BoxSet { ivs }
    }

    pub fn from_bounds(bounds: &[[f64; 2]]) -> Self {
        BoxSet {
            ivs: bounds.iter().map(|b| Interval::new(b[0], b[1])).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.ivs.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.ivs.len() && self.ivs.iter().zip(p).all(|(iv, &v)| iv.contains(v))
    }

    pub fn contains_box(&self, other: &BoxSet) -> bool {
        self.ivs
            .iter()
            .zip(&other.ivs)
            .all(|(a, b)| a.lo <= b.lo && b.hi <= a.hi)
    }

    /// Intersection, or `None` when empty.
    pub fn intersect(&self, other: &BoxSet) -> Option<BoxSet> {
        let mut ivs = Vec::with_capacity(self.ivs.len());
        for (a, b) in self.ivs.iter().zip(&other.ivs) {
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if lo > hi {
                return None;
            }
            ivs.push(Interval { lo, hi });
        }
        Some(BoxSet { ivs })
    }

    /// Cartesian product.
    pub fn times(&self, other: &BoxSet) -> BoxSet {
        BoxSet {
            ivs: self.ivs.iter().chain(&other.ivs).copied().collect(),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.ivs.iter().map(|iv| iv.mid()).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.ivs.iter().map(|iv| iv.width()).fold(0.0, f64::max)
    }

    /// Index of the widest dimension, lowest index on ties.
    pub fn widest_dim(&self) -> usize {
        let mut best = 0;
        for (i, iv) in self.ivs.iter().enumerate() {
            if iv.width() > self.ivs[best].width() {
                best = i;
            }
        }
        best
    }

    pub fn bisect(&self, dim: usize) -> (BoxSet, BoxSet) {
        let (a, b) = self.ivs[dim].bisect();
        let mut l = self.clone();
        let mut r = self.clone();
        l.ivs[dim] = a;
        r.ivs[dim] = b;
        (l, r)
    }

    /// Maps a point of the unit cube into the box.
    pub fn scale_unit(&self, unit: &[f64]) -> Vec<f64> {
        self.ivs
            .iter()
            .zip(unit)
            .map(|(iv, &t)| iv.lo + t * iv.width())
            .collect()
    }

    /// Regular grid with `per_dim` points per dimension (endpoints included).
    pub fn grid(&self, per_dim: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .ivs
            .iter()
            .map(|iv| {
                if per_dim <= 1 || iv.width() == 0.0 {
                    vec![iv.mid()]
                } else {
                    (0..per_dim)
                        .map(|k| iv.lo + iv.width() * k as f64 / (per_dim - 1) as f64)
                        .collect()
                }
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for prefix in &out {
                for &v in &axis {
                    let mut p = prefix.clone();
                    p.push(v);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }

    /// Constraints `v_i - lo >= 0`, `hi - v_i >= 0` over `nvars` variables with
    /// dimension `i` mapped to variable `offset + i`.
    pub fn as_constraints(&self, nvars: usize, offset: usize) -> Vec<(Polynomial, Rel)> {
        let mut out = Vec::new();
        for (i, iv) in self.ivs.iter().enumerate() {
            let v = Polynomial::var(nvars, offset + i);
            out.push((v.add_constant(-iv.lo), Rel::Ge));
            out.push((v.scale(-1.0).add_constant(iv.hi), Rel::Ge));
        }
        out
    }
}

/// Outcome of testing a sub-box against a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxClass {
    Inside,
    Outside,
    Unknown,
}

/// Box intersected with finitely many polynomial sign conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiAlgebraicSet {
    pub base: BoxSet,
    pub constraints: Vec<(Polynomial, Rel)>,
}

impl SemiAlgebraicSet {
    pub fn from_box(base: BoxSet) -> Self {
        SemiAlgebraicSet {
            base,
            constraints: Vec::new(),
        }
    }

    pub fn with(mut self, p: Polynomial, rel: Rel) -> Self {
        self.constraints.push((p, rel));
        self
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.base.contains(p)
            && self
                .constraints
                .iter()
                .all(|(q, r)| r.holds(q.eval_unchecked(p)))
    }

    /// Interval classification of a sub-box (assumed inside `base`).
    pub fn classify(&self, b: &BoxSet) -> BoxClass {
        let clipped = match self.base.intersect(b) {
            None => return BoxClass::Outside,
            Some(c) => c,
        };
        let mut all = self.base.contains_box(b);
        for (q, r) in &self.constraints {
            match r.decide(q.interval_eval(&clipped.ivs)) {
                Some(false) => return BoxClass::Outside,
                Some(true) => {}
                None => all = false,
            }
        }
        if all {
            BoxClass::Inside
        } else {
            BoxClass::Unknown
        }
    }

    /// Intersection of two sets over the same variables; `None` if the boxes are disjoint.
    pub fn intersect(&self, other: &SemiAlgebraicSet) -> Option<SemiAlgebraicSet> {
        let base = self.base.intersect(&other.base)?;
        let mut constraints = self.constraints.clone();
        constraints.extend(other.constraints.iter().cloned());
        Some(SemiAlgebraicSet { base, constraints })
    }

    /// Preimage under a polynomial map: `{ z in new_base : maps(z) in self }`.
    /// The base box of `self` becomes explicit constraints on the map.
    pub fn pullback(&self, maps: &[Polynomial], new_base: BoxSet) -> SemiAlgebraicSet {
        assert_eq!(maps.len(), self.dim());
        let mut constraints = Vec::new();
        for (i, iv) in self.base.ivs.iter().enumerate() {
            constraints.push((maps[i].add_constant(-iv.lo), Rel::Ge));
            constraints.push((maps[i].scale(-1.0).add_constant(iv.hi), Rel::Ge));
        }
        for (q, r) in &self.constraints {
            constraints.push((q.compose(maps), *r));
        }
        SemiAlgebraicSet {
            base: new_base,
            constraints,
        }
    }
}
