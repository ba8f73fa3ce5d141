//! The (δ,K)-automaton tracking fault occurrence over pairs of runs, and the
//! labeling of state pairs by the symbols σ1, σ2, σ3.
//!
//! Locations are identified by their index: `0` is the initial location,
//! `1..=K` count steps since the fault, `K+1` is the accepting location and
//! `K+2` the trap.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    BoxSet, ContinuousModel, FiniteModel, Interval, Polynomial, Rel, SemiAlgebraicSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    /// close outputs, neither state faulty
    #[serde(rename = "sigma1")]
    S1,
    /// outputs apart, or the shadow state is faulty
    #[serde(rename = "sigma2")]
    S2,
    /// close outputs, only the first state faulty
    #[serde(rename = "sigma3")]
    S3,
}

impl Symbol {
    pub const ALL: [Symbol; 3] = [Symbol::S1, Symbol::S2, Symbol::S3];

    pub fn index(self) -> usize {
        match self {
            Symbol::S1 => 0,
            Symbol::S2 => 1,
            Symbol::S3 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Symbol::S1 => "sigma1",
            Symbol::S2 => "sigma2",
            Symbol::S3 => "sigma3",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AutomatonError {
    #[error("delta must be positive, got {0}")]
    BadDelta(f64),
    #[error("point pair outside the state set")]
    OutsideDomain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaKDfa {
    pub k: usize,
    pub delta: f64,
    trans: Vec<[usize; 3]>,
}

impl DeltaKDfa {
    pub fn new(delta: f64, k: usize) -> Result<Self, AutomatonError> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(AutomatonError::BadDelta(delta));
        }
        let acc = k + 1;
        let trap = k + 2;
        let mut trans = vec![[0usize; 3]; k + 3];
        // initial location; with K = 0 the step chain is empty and σ3 accepts at once
        trans[0] = [0, trap, if k == 0 { acc } else { 1 }];
        for (i, row) in trans.iter_mut().enumerate().take(k + 1).skip(1) {
            let next = if i == k { acc } else { i + 1 };
            *row = [next, trap, next];
        }
        trans[acc] = [acc; 3];
        trans[trap] = [trap; 3];
        Ok(DeltaKDfa { k, delta, trans })
    }

    pub fn num_states(&self) -> usize {
        self.k + 3
    }

    pub fn init(&self) -> usize {
        0
    }

    pub fn accept(&self) -> usize {
        self.k + 1
    }

    pub fn trap(&self) -> usize {
        self.k + 2
    }

    pub fn tau(&self, q: usize, s: Symbol) -> usize {
        self.trans[q][s.index()]
    }

    pub fn nxt(&self, q: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = Symbol::ALL.iter().map(|&s| self.tau(q, s)).collect();
        set.into_iter().collect()
    }

    /// Symbols driving `q` to `q2` (empty when not connected).
    pub fn symbols_between(&self, q: usize, q2: usize) -> Vec<Symbol> {
        Symbol::ALL
            .iter()
            .copied()
            .filter(|&s| self.tau(q, s) == q2)
            .collect()
    }

    pub fn name(&self, q: usize) -> String {
        if q == 0 {
            "q0".into()
        } else if q == self.accept() {
            "F".into()
        } else if q == self.trap() {
            "trap".into()
        } else {
            format!("q{q}")
        }
    }

    /// Ordering used by search heuristics: accepting best, trap worst,
    /// otherwise the number of steps already survived after the fault.
    pub fn progress(&self, q: usize) -> i64 {
        if q == self.accept() {
            i64::MAX / 2
        } else if q == self.trap() {
            i64::MIN / 2
        } else {
            q as i64
        }
    }

    pub fn dump(&self) -> DfaDump {
        let states = (0..self.num_states())
            .map(|q| DumpState {
                name: self.name(q),
                delta_index: q,
            })
            .collect();
        let mut transitions = Vec::new();
        for q in 0..self.num_states() {
            for s in Symbol::ALL {
                transitions.push(DumpEdge {
                    from: self.name(q),
                    symbol: s,
                    to: self.name(self.tau(q, s)),
                });
            }
        }
        DfaDump {
            delta: self.delta,
            k: self.k,
            states,
            transitions,
            accepting: vec![self.name(self.accept())],
            initial: self.name(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpState {
    pub name: String,
    pub delta_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpEdge {
    pub from: String,
    pub symbol: Symbol,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaDump {
    pub delta: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub initial: String,
    pub accepting: Vec<String>,
    pub states: Vec<DumpState>,
    pub transitions: Vec<DumpEdge>,
}

/// Slack added to δ² so that pairs exactly δ apart are not split by rounding
/// (|1.2 - 2.2| evaluates to 1.0000000000000002).
pub fn tie_tol(delta: f64) -> f64 {
    1e-9 * (delta * delta).max(1.0)
}

/// Symbol of a pair from its squared output distance and fault flags.
pub fn label_values(dist2: f64, delta: f64, faulty: bool, shadow_faulty: bool) -> Symbol {
    let close = dist2 <= delta * delta + tie_tol(delta);
    match (close, faulty, shadow_faulty) {
        (true, false, false) => Symbol::S1,
        (true, true, false) => Symbol::S3,
        _ => Symbol::S2,
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

pub fn label_finite(m: &FiniteModel, delta: f64, s: usize, t: usize) -> Symbol {
    label_values(
        dist2(&m.output[s], &m.output[t]),
        delta,
        m.is_faulty_idx(s),
        m.is_faulty_idx(t),
    )
}

pub fn label_continuous(m: &ContinuousModel, delta: f64, x: &[f64], xh: &[f64]) -> Symbol {
    label_values(
        dist2(&m.output(x), &m.output(xh)),
        delta,
        m.is_faulty(x),
        m.is_faulty(xh),
    )
}

/// Label preimages over `R = X × X` as unions of semi-algebraic sets in the
/// variables `(x, xh)`.
#[derive(Debug, Clone)]
pub struct LabelPartition {
    pub delta: f64,
    pub n: usize,
    /// `δ² + tie − ‖h(x) − h(xh)‖²`
    pub p1: Polynomial,
    pub r: BoxSet,
    xs: BoxSet,
    xf: BoxSet,
}

impl LabelPartition {
    pub fn new(m: &ContinuousModel, delta: f64) -> Self {
        let n = m.n;
        let nv = 2 * n;
        let first: Vec<usize> = (0..n).collect();
        let second: Vec<usize> = (n..nv).collect();
        let mut d2 = Polynomial::zero(nv);
        for h in &m.h {
            let diff = h.remap(nv, &first).sub(&h.remap(nv, &second));
            d2 = d2.add(&diff.mul(&diff));
        }
        let p1 = Polynomial::constant(nv, delta * delta + tie_tol(delta)).sub(&d2);
        LabelPartition {
            delta,
            n,
            p1,
            r: m.x.times(&m.x),
            xs: m.x.clone(),
            xf: m.xf.clone(),
        }
    }

    pub fn label(
        &self,
        m: &ContinuousModel,
        x: &[f64],
        xh: &[f64],
    ) -> Result<Symbol, AutomatonError> {
        if !m.x.contains(x) || !m.x.contains(xh) {
            return Err(AutomatonError::OutsideDomain);
        }
        Ok(label_continuous(m, self.delta, x, xh))
    }

    fn p1_set(&self) -> SemiAlgebraicSet {
        SemiAlgebraicSet::from_box(self.r.clone()).with(self.p1.clone(), Rel::Ge)
    }

    fn not_p1_set(&self) -> SemiAlgebraicSet {
        SemiAlgebraicSet::from_box(self.r.clone()).with(self.p1.clone(), Rel::Lt)
    }

    /// Restricts one copy (`offset` 0 for x, n for xh) to the faulty box.
    fn in_fault(&self, offset: usize) -> SemiAlgebraicSet {
        let mut base = self.r.clone();
        for i in 0..self.n {
            base.ivs[offset + i] = self.xf.ivs[i];
        }
        SemiAlgebraicSet::from_box(base)
    }

    /// Pieces whose union is `{copy ∉ XF}`.
    fn out_of_fault(&self, offset: usize) -> Vec<SemiAlgebraicSet> {
        let nv = 2 * self.n;
        let mut out = Vec::new();
        for i in 0..self.n {
            let (xl, xh) = (self.xs.ivs[i].lo, self.xs.ivs[i].hi);
            let (fl, fh) = (self.xf.ivs[i].lo, self.xf.ivs[i].hi);
            let v = Polynomial::var(nv, offset + i);
            if fl > xl {
                let mut base = self.r.clone();
                base.ivs[offset + i] = Interval::new(xl, fl);
                out.push(SemiAlgebraicSet::from_box(base).with(v.add_constant(-fl), Rel::Lt));
            }
            if fh < xh {
                let mut base = self.r.clone();
                base.ivs[offset + i] = Interval::new(fh, xh);
                out.push(SemiAlgebraicSet::from_box(base).with(v.add_constant(-fh), Rel::Gt));
            }
        }
        out
    }

    pub fn preimage(&self, s: Symbol) -> Vec<SemiAlgebraicSet> {
        let p1 = self.p1_set();
        match s {
            Symbol::S1 => {
                let mut out = Vec::new();
                for a in self.out_of_fault(0) {
                    for b in self.out_of_fault(self.n) {
                        if let Some(ab) = a.intersect(&b).and_then(|ab| ab.intersect(&p1)) {
                            out.push(ab);
                        }
                    }
                }
                out
            }
            Symbol::S3 => {
                let inside = self.in_fault(0);
                self.out_of_fault(self.n)
                    .into_iter()
                    .filter_map(|b| inside.intersect(&b).and_then(|ab| ab.intersect(&p1)))
                    .collect()
            }
            Symbol::S2 => {
                let mut out = vec![self.not_p1_set()];
                if let Some(s) = self.in_fault(self.n).intersect(&p1) {
                    out.push(s);
                }
                out
            }
        }
    }

    /// `G(q,q')`: pairs whose label drives `q` to `q2`.
    pub fn guard(&self, dfa: &DeltaKDfa, q: usize, q2: usize) -> Vec<SemiAlgebraicSet> {
        dfa.symbols_between(q, q2)
            .into_iter()
            .flat_map(|s| self.preimage(s))
            .collect()
    }
}

/// Locations reachable from the initial location in one step, i.e. `Nxt(q0)`.
pub fn q_init(dfa: &DeltaKDfa) -> Vec<usize> {
    dfa.nxt(dfa.init())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog::{running_example, two_room, TwoRoomParams};

    #[test]
    fn fig2_shape() {
        let d = DeltaKDfa::new(1.0, 3).unwrap();
        assert_eq!(d.num_states(), 6);
        assert_eq!(d.nxt(0), vec![0, 1, 5]);
        assert_eq!(d.nxt(4), vec![4]);
        assert_eq!(d.nxt(2), vec![3, 5]);
        assert_eq!(d.tau(3, Symbol::S1), 4);
        assert_eq!(d.tau(3, Symbol::S3), 4);
    }

    #[test]
    fn fig3_shape() {
        let d = DeltaKDfa::new(0.5, 5).unwrap();
        assert_eq!(d.num_states(), 8);
        assert_eq!(d.tau(5, Symbol::S1), d.accept());
    }

    #[test]
    fn k_zero_accepts_on_first_fault() {
        let d = DeltaKDfa::new(1.0, 0).unwrap();
        assert_eq!(d.num_states(), 3);
        assert_eq!(d.tau(0, Symbol::S3), d.accept());
        assert_eq!(d.tau(0, Symbol::S1), 0);
        assert_eq!(d.tau(0, Symbol::S2), d.trap());
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(DeltaKDfa::new(0.0, 2).is_err());
        assert!(DeltaKDfa::new(-1.0, 2).is_err());
    }

    #[test]
    fn running_example_labels() {
        let m = running_example();
        let idx = |v: f64| m.state_index(&[v]).unwrap();
        assert_eq!(label_finite(&m, 1.0, idx(0.0), idx(0.0)), Symbol::S1);
        assert_eq!(label_finite(&m, 1.0, idx(1.2), idx(2.2)), Symbol::S3);
        assert_eq!(label_finite(&m, 1.0, idx(3.2), idx(5.2)), Symbol::S2);
        assert_eq!(label_finite(&m, 1.0, idx(2.2), idx(1.2)), Symbol::S2);
    }

    #[test]
    fn guard_unions() {
        let d = DeltaKDfa::new(1.0, 3).unwrap();
        assert_eq!(d.symbols_between(0, 1), vec![Symbol::S3]);
        assert!(d.symbols_between(d.trap(), d.accept()).is_empty());
        assert_eq!(d.symbols_between(1, 2), vec![Symbol::S1, Symbol::S3]);
    }

    #[test]
    fn preimages_agree_with_pointwise_label() {
        let m = two_room(TwoRoomParams::default());
        let part = LabelPartition::new(&m, 0.5);
        let pts = [
            ([20.0, 20.0], [20.2, 20.1]),
            ([24.5, 25.0], [23.9, 25.0]),
            ([24.5, 25.0], [24.6, 25.0]),
            ([16.0, 29.0], [25.0, 25.0]),
            ([24.0, 24.0], [23.7, 24.0]),
        ];
        for (x, xh) in pts {
            let z: Vec<f64> = x.iter().chain(xh.iter()).copied().collect();
            let s = part.label(&m, &x, &xh).unwrap();
            for t in Symbol::ALL {
                let inside = part.preimage(t).iter().any(|set| set.contains(&z));
                assert_eq!(inside, s == t, "{x:?} {xh:?} {t:?}");
            }
        }
    }
}
