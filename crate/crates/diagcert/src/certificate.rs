//! Hybrid certificates: one polynomial in `(x, xh)` per automaton location.
//!
//! A B-certificate proves diagnosability: it is non-positive on initial
//! pairs, positive everywhere at the accepting location, and never increases
//! along product transitions. A V-certificate refutes it: it is non-positive
//! on some initial pair, and wherever it is non-positive some input pair
//! makes it strictly decrease, so its sublevel set funnels into the accepting
//! location.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{label_continuous, label_finite, q_init, DeltaKDfa, LabelPartition};
use crate::falsifier::{
    run_forall_exists, run_universal, violation, Branch, FalsifierConfig, FalsifyOutcome,
    ForallExistsConstraint, Mode, UniversalConstraint,
};
use crate::model::{
    monomials, BoxSet, ContinuousModel, Exps, FiniteModel, Interval, Polynomial, Rel,
    SemiAlgebraicSet, SystemModel, TermDoc, VarTable,
};

#[derive(Debug, Error)]
pub enum CertError {
    #[error("certificate kind {found:?} where {expected:?} was needed")]
    KindMismatch { expected: CertKind, found: CertKind },
    #[error("certificate has {found} locations, the automaton has {expected}")]
    LocationCount { expected: usize, found: usize },
    #[error("certificate dimension {found} does not match the model's {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("{0}")]
    Doc(String),
    #[error("malformed certificate document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Automaton(#[from] crate::automaton::AutomatonError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertKind {
    B,
    V,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub kind: CertKind,
    pub delta: f64,
    pub k: usize,
    /// state dimension; location polynomials range over `2n` variables
    pub n: usize,
    pub locations: Vec<Polynomial>,
}

impl Certificate {
    pub fn eval(&self, q: usize, x: &[f64], xh: &[f64]) -> f64 {
        let mut z = Vec::with_capacity(2 * self.n);
        z.extend_from_slice(x);
        z.extend_from_slice(xh);
        self.locations[q].eval_unchecked(&z)
    }

    pub fn zero(kind: CertKind, delta: f64, k: usize, n: usize) -> Self {
        Certificate {
            kind,
            delta,
            k,
            n,
            locations: vec![Polynomial::zero(2 * n); k + 3],
        }
    }

    pub fn to_doc(&self) -> CertificateDoc {
        let table = VarTable::pair(self.n);
        CertificateDoc {
            kind: self.kind,
            delta: self.delta,
            k: self.k,
            n: Some(self.n),
            locations: self
                .locations
                .iter()
                .enumerate()
                .map(|(i, p)| LocationDoc {
                    delta_index: i,
                    terms: crate::model::spec::poly_to_doc(p, &table),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("certificates always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, CertError> {
        let doc: CertificateDoc = serde_json::from_str(text)?;
        doc.into_certificate()
    }

    pub fn load(path: &Path) -> Result<Self, CertError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CertError::Doc(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn check_shape(&self, dfa: &DeltaKDfa, n: usize) -> Result<(), CertError> {
        if self.locations.len() != dfa.num_states() {
            return Err(CertError::LocationCount {
                expected: dfa.num_states(),
                found: self.locations.len(),
            });
        }
        if self.n != n {
            return Err(CertError::Dimension {
                expected: n,
                found: self.n,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationDoc {
    pub delta_index: usize,
    pub terms: Vec<TermDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub kind: CertKind,
    pub delta: f64,
    #[serde(rename = "K")]
    pub k: usize,
    /// state dimension; inferred from variable names when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub locations: Vec<LocationDoc>,
}

impl CertificateDoc {
    pub fn into_certificate(self) -> Result<Certificate, CertError> {
        let n = match self.n {
            Some(n) => n,
            None => infer_dim(&self.locations),
        };
        let table = VarTable::pair(n);
        let nloc = self.k + 3;
        let mut locations: Vec<Option<Polynomial>> = vec![None; nloc];
        for loc in &self.locations {
            if loc.delta_index >= nloc {
                return Err(CertError::Doc(format!(
                    "delta_index {} out of range for K={}",
                    loc.delta_index, self.k
                )));
            }
            let p = crate::model::spec::poly_from_doc(&loc.terms, &table)?;
            if locations[loc.delta_index].replace(p).is_some() {
                return Err(CertError::Doc(format!(
                    "delta_index {} given twice",
                    loc.delta_index
                )));
            }
        }
        let locations = locations
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| CertError::Doc(format!("missing location {i}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Certificate {
            kind: self.kind,
            delta: self.delta,
            k: self.k,
            n,
            locations,
        })
    }
}

fn infer_dim(locs: &[LocationDoc]) -> usize {
    let mut n = 1;
    for l in locs {
        for t in &l.terms {
            for name in t.exps.keys() {
                let digits = name.trim_start_matches("xh").trim_start_matches('x');
                if let Ok(i) = digits.parse::<usize>() {
                    n = n.max(i);
                }
            }
        }
    }
    n
}

/// Monomial basis per location; the unknown coefficients are laid out
/// location after location.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub n: usize,
    pub monos: Vec<Vec<Exps>>,
    offsets: Vec<usize>,
}

impl Template {
    pub fn new(n: usize, monos: Vec<Vec<Exps>>) -> Self {
        let mut offsets = Vec::with_capacity(monos.len());
        let mut acc = 0;
        for m in &monos {
            assert!(
                !m.is_empty(),
                "template locations need at least one monomial"
            );
            offsets.push(acc);
            acc += m.len();
        }
        Template { n, monos, offsets }
    }

    /// Every monomial of total degree `<= degree` at every location.
    pub fn uniform(n: usize, k: usize, degree: u32) -> Self {
        Template::new(n, vec![monomials(2 * n, degree); k + 3])
    }

    pub fn num_coeffs(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0) + self.monos.last().map(|m| m.len()).unwrap_or(0)
    }

    pub fn num_locations(&self) -> usize {
        self.monos.len()
    }

    /// Sparse coefficient row of location `q` evaluated at the pair `z`, added with `sign` into `row`.
    pub fn accumulate(&self, row: &mut Vec<(usize, f64)>, q: usize, z: &[f64], sign: f64) {
        for (r, e) in self.monos[q].iter().enumerate() {
            let v = crate::model::poly::mono_eval(e, z);
            if v != 0.0 {
                row.push((self.offsets[q] + r, sign * v));
            }
        }
    }

    pub fn instantiate(&self, kind: CertKind, delta: f64, coeffs: &[f64]) -> Certificate {
        let nv = 2 * self.n;
        let locations = self
            .monos
            .iter()
            .enumerate()
            .map(|(q, ms)| {
                Polynomial::from_terms(
                    nv,
                    ms.iter()
                        .enumerate()
                        .map(|(r, e)| (e.clone(), coeffs[self.offsets[q] + r])),
                )
            })
            .collect();
        Certificate {
            kind,
            delta,
            k: self.monos.len() - 3,
            n: self.n,
            locations,
        }
    }
}

/// One condition of a certificate, independent of how it is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cond {
    /// non-positive on initial pairs that enter location `q`
    Init { q: usize },
    /// positive everywhere at the accepting location
    Accept,
    /// non-increasing along the edge `q -> q2`
    Step { q: usize, q2: usize },
    /// V non-positive on initial pairs that enter the non-trap location `q`
    VInit { q: usize },
    /// some initial pair avoids the trap
    VInitNonempty,
    /// V positive on pairs outside the state set that can step into it
    VOutside { q: usize },
    /// where V is non-positive at `q`, some input pair makes it decrease
    VDecrease { q: usize },
}

impl Cond {
    pub fn name(&self, dfa: &DeltaKDfa) -> String {
        match *self {
            Cond::Init { q } => format!("init[{}]", dfa.name(q)),
            Cond::Accept => "accepting-positive".into(),
            Cond::Step { q, q2 } => format!("step[{}->{}]", dfa.name(q), dfa.name(q2)),
            Cond::VInit { q } => format!("v-init[{}]", dfa.name(q)),
            Cond::VInitNonempty => "v-init-nonempty".into(),
            Cond::VOutside { q } => format!("v-outside[{}]", dfa.name(q)),
            Cond::VDecrease { q } => format!("v-decrease[{}]", dfa.name(q)),
        }
    }
}

/// Condition list of a B-certificate. The accepting location's own
/// non-increase is included unless `exclude_accepting_decrease` is set.
pub fn b_conditions(dfa: &DeltaKDfa, exclude_accepting_decrease: bool) -> Vec<Cond> {
    let mut out: Vec<Cond> = q_init(dfa).into_iter().map(|q| Cond::Init { q }).collect();
    out.push(Cond::Accept);
    for q in 0..dfa.num_states() {
        if q == dfa.trap() || (exclude_accepting_decrease && q == dfa.accept()) {
            continue;
        }
        for q2 in dfa.nxt(q) {
            out.push(Cond::Step { q, q2 });
        }
    }
    out
}

/// Condition list of a V-certificate. Initial pairs labelled into the trap
/// can never reach the accepting location, so they carry no sign condition.
pub fn v_conditions(dfa: &DeltaKDfa) -> Vec<Cond> {
    let mut out: Vec<Cond> = q_init(dfa)
        .into_iter()
        .filter(|&q| q != dfa.trap())
        .map(|q| Cond::VInit { q })
        .collect();
    out.push(Cond::VInitNonempty);
    for q in 0..dfa.num_states() {
        if q != dfa.accept() {
            out.push(Cond::VOutside { q });
        }
    }
    for q in 0..dfa.num_states() {
        if q != dfa.accept() {
            out.push(Cond::VDecrease { q });
        }
    }
    out
}

/// Over-approximation of the pairs outside `R` that can step into `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct VDomainInfo {
    pub boxes: Vec<BoxSet>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    UserSupplied,
    Computed,
}

/// Variable layout of the step space `(x, xh, u, uh)`.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n: usize,
    pub m: usize,
}

impl Layout {
    pub fn full(&self) -> usize {
        2 * self.n + 2 * self.m
    }

    /// A polynomial over `(x, xh)` seen in the step space.
    pub fn lift_pair(&self, p: &Polynomial) -> Polynomial {
        let map: Vec<usize> = (0..2 * self.n).collect();
        p.remap(self.full(), &map)
    }

    /// `(f(x,u), f(xh,uh))` as polynomials over the step space.
    pub fn successor_maps(&self, f: &[Polynomial]) -> Vec<Polynomial> {
        let (n, m) = (self.n, self.m);
        let first: Vec<usize> = (0..n).chain(2 * n..2 * n + m).collect();
        let second: Vec<usize> = (n..2 * n).chain(2 * n + m..2 * n + 2 * m).collect();
        let mut out: Vec<Polynomial> = f.iter().map(|p| p.remap(self.full(), &first)).collect();
        out.extend(f.iter().map(|p| p.remap(self.full(), &second)));
        out
    }
}

/// Bounding region for the pre-image search: `R` inflated by the largest
/// one-step displacement of `f` over `X × U`.
fn inflated_region(m: &ContinuousModel) -> BoxSet {
    let mut zb = m.x.ivs.clone();
    zb.extend(m.u.ivs.iter().copied());
    let mut ivs = Vec::with_capacity(m.n);
    for i in 0..m.n {
        let disp = m.f[i]
            .sub(&Polynomial::var(m.n + m.m, i))
            .interval_eval(&zb);
        let r = disp.lo.abs().max(disp.hi.abs());
        ivs.push(Interval::new(m.x.ivs[i].lo - r, m.x.ivs[i].hi + r));
    }
    let b = BoxSet::new(ivs);
    b.times(&b)
}

/// Collects boxes outside `R` whose interval image (over all inputs) may meet `R`.
/// Splitting stops at `resolution`; if the box budget runs out the remaining
/// boxes are kept whole, which only enlarges the over-approximation.
pub fn compute_pre_complement(
    m: &ContinuousModel,
    resolution: f64,
    max_boxes: usize,
) -> VDomainInfo {
    let r = m.x.times(&m.x);
    let uu = m.u.times(&m.u);
    let lay = Layout { n: m.n, m: m.m };
    let maps = lay.successor_maps(&m.f);
    let mut out = Vec::new();
    let mut stack = subtract_box(&inflated_region(m), &r);
    let mut expanded = 0;
    while let Some(b) = stack.pop() {
        expanded += 1;
        let mut ivs = b.ivs.clone();
        ivs.extend(uu.ivs.iter().copied());
        let img: Vec<Interval> = maps.iter().map(|p| p.interval_eval(&ivs)).collect();
        let meets = img
            .iter()
            .zip(&r.ivs)
            .all(|(a, b)| a.hi >= b.lo && a.lo <= b.hi);
        if !meets {
            continue;
        }
        if b.max_width() <= resolution || expanded > max_boxes {
            out.push(b);
            continue;
        }
        let (lft, rgt) = b.bisect(b.widest_dim());
        stack.push(lft);
        stack.push(rgt);
    }
    VDomainInfo {
        boxes: out,
        provenance: Provenance::Computed,
    }
}

/// `outer ∖ inner` as a list of boxes (closed boxes sharing faces with `inner`).
pub fn subtract_box(outer: &BoxSet, inner: &BoxSet) -> Vec<BoxSet> {
    let mut out = Vec::new();
    let mut rest = outer.clone();
    for d in 0..outer.dim() {
        let (lo, hi) = (rest.ivs[d].lo, rest.ivs[d].hi);
        let (il, ih) = (inner.ivs[d].lo, inner.ivs[d].hi);
        if il > lo {
            let mut b = rest.clone();
            b.ivs[d] = Interval::new(lo, il.min(hi));
            out.push(b);
        }
        if ih < hi {
            let mut b = rest.clone();
            b.ivs[d] = Interval::new(ih.max(lo), hi);
            out.push(b);
        }
        let nl = lo.max(il);
        let nh = hi.min(ih);
        if nl > nh {
            return out;
        }
        rest.ivs[d] = Interval::new(nl, nh);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckConfig {
    pub falsifier: FalsifierConfig,
    pub exclude_accepting_decrease: bool,
    /// resolution of the computed pre-image shell for continuous V checks
    pub pre_resolution: f64,
    pub pre_max_boxes: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            falsifier: FalsifierConfig::default(),
            exclude_accepting_decrease: false,
            pre_resolution: 0.25,
            pre_max_boxes: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckVerdict {
    #[serde(rename = "VALID")]
    Valid,
    #[serde(rename = "INVALID")]
    Invalid,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl CheckVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckVerdict::Valid => "VALID",
            CheckVerdict::Invalid => "INVALID",
            CheckVerdict::Unknown => "UNKNOWN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub cond: Cond,
    pub outcome: FalsifyOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub kind: CertKind,
    pub verdict: CheckVerdict,
    pub margin: f64,
    pub exhaustive: bool,
    pub conditions: Vec<ConditionReport>,
}

fn verdict_of(conds: &[ConditionReport]) -> CheckVerdict {
    if conds.iter().any(|c| c.outcome.is_counterexample()) {
        CheckVerdict::Invalid
    } else if conds.iter().all(|c| {
        matches!(
            c.outcome,
            FalsifyOutcome::Proved | FalsifyOutcome::GridValidated
        )
    }) {
        CheckVerdict::Valid
    } else {
        CheckVerdict::Unknown
    }
}

pub fn check_certificate(
    model: &SystemModel,
    cert: &Certificate,
    mode: Mode,
    cfg: &CheckConfig,
) -> Result<CheckReport, CertError> {
    let dfa = DeltaKDfa::new(cert.delta, cert.k)?;
    cert.check_shape(&dfa, model.state_dim())?;
    let conds = match cert.kind {
        CertKind::B => b_conditions(&dfa, cfg.exclude_accepting_decrease),
        CertKind::V => v_conditions(&dfa),
    };
    let (reports, exhaustive) = match model {
        SystemModel::Finite(f) => {
            let ex = FiniteChecker {
                m: f,
                dfa: &dfa,
                margin: cfg.falsifier.margin,
                tol: cfg.falsifier.violation_tol,
            };
            (
                conds
                    .iter()
                    .map(|c| ConditionReport {
                        name: c.name(&dfa),
                        cond: *c,
                        outcome: ex.check(cert, c),
                    })
                    .collect::<Vec<_>>(),
                true,
            )
        }
        SystemModel::Continuous(c) => {
            let ctx = ContinuousConditions::new(c, &dfa);
            let vdom = if cert.kind == CertKind::V {
                Some(compute_pre_complement(
                    c,
                    cfg.pre_resolution,
                    cfg.pre_max_boxes,
                ))
            } else {
                None
            };
            let reports = conds
                .iter()
                .map(|cd| ConditionReport {
                    name: cd.name(&dfa),
                    cond: *cd,
                    outcome: ctx.check(cert, cd, vdom.as_ref(), mode, &cfg.falsifier),
                })
                .collect();
            (reports, false)
        }
    };
    Ok(CheckReport {
        kind: cert.kind,
        verdict: verdict_of(&reports),
        margin: cfg.falsifier.margin,
        exhaustive,
        conditions: reports,
    })
}

/// Exact enumeration of every condition over a finite model.
pub struct FiniteChecker<'a> {
    pub m: &'a FiniteModel,
    pub dfa: &'a DeltaKDfa,
    pub margin: f64,
    /// violations up to this size are treated as rounding noise
    pub tol: f64,
}

impl FiniteChecker<'_> {
    fn pair_point(&self, s: usize, t: usize) -> Vec<f64> {
        let mut p = self.m.states[s].clone();
        p.extend_from_slice(&self.m.states[t]);
        p
    }

    fn step_point(&self, s: usize, t: usize, a: usize, b: usize) -> Vec<f64> {
        let mut p = self.pair_point(s, t);
        p.extend_from_slice(&self.m.inputs[a]);
        p.extend_from_slice(&self.m.inputs[b]);
        p
    }

    fn ev(&self, cert: &Certificate, q: usize, s: usize, t: usize) -> f64 {
        cert.eval(q, &self.m.states[s], &self.m.states[t])
    }

    fn mag(&self, cert: &Certificate, q: usize, s: usize, t: usize) -> f64 {
        cert.locations[q].abs_eval(&self.pair_point(s, t))
    }

    /// Worst violation of a condition; `Proved` if there is none.
    pub fn check(&self, cert: &Certificate, c: &Cond) -> FalsifyOutcome {
        let m = self.m;
        let dfa = self.dfa;
        let ns = m.num_states();
        let ni = m.num_inputs();
        let mut worst: Option<(Vec<f64>, f64)> = None;
        // differences of large cancelling terms are only known up to rounding
        let mut note = |p: Vec<f64>, v: f64, scale: f64| {
            if v > self.tol + 1e-12 * scale && worst.as_ref().map(|(_, w)| v > *w).unwrap_or(true) {
                worst = Some((p, v));
            }
        };
        match *c {
            Cond::Init { q } | Cond::VInit { q } => {
                for &s in &m.initial {
                    for &t in &m.initial {
                        if dfa.tau(dfa.init(), label_finite(m, dfa.delta, s, t)) == q {
                            note(
                                self.pair_point(s, t),
                                violation(Rel::Le, self.ev(cert, q, s, t), self.margin),
                                self.mag(cert, q, s, t),
                            );
                        }
                    }
                }
            }
            Cond::VInitNonempty => {
                let any = m.initial.iter().any(|&s| {
                    m.initial.iter().any(|&t| {
                        dfa.tau(dfa.init(), label_finite(m, dfa.delta, s, t)) != dfa.trap()
                    })
                });
                if !any {
                    return FalsifyOutcome::Counterexample {
                        point: Vec::new(),
                        violation: f64::INFINITY,
                    };
                }
            }
            Cond::Accept => {
                for s in 0..ns {
                    for t in 0..ns {
                        note(
                            self.pair_point(s, t),
                            violation(Rel::Gt, self.ev(cert, dfa.accept(), s, t), self.margin),
                            self.mag(cert, dfa.accept(), s, t),
                        );
                    }
                }
            }
            Cond::Step { q, q2 } => {
                for s in 0..ns {
                    for t in 0..ns {
                        let here = self.ev(cert, q, s, t);
                        for a in 0..ni {
                            for b in 0..ni {
                                let (s2, t2) = (m.next(s, a), m.next(t, b));
                                if dfa.tau(q, label_finite(m, dfa.delta, s2, t2)) != q2 {
                                    continue;
                                }
                                let d = self.ev(cert, q2, s2, t2) - here;
                                note(
                                    self.step_point(s, t, a, b),
                                    violation(Rel::Le, d, self.margin),
                                    self.mag(cert, q2, s2, t2) + self.mag(cert, q, s, t),
                                );
                            }
                        }
                    }
                }
            }
            // every successor of a state stays in the finite state set
            Cond::VOutside { .. } => {}
            Cond::VDecrease { q } => {
                for s in 0..ns {
                    for t in 0..ns {
                        let here = self.ev(cert, q, s, t);
                        if here > 0.0 {
                            continue;
                        }
                        let mut best = (f64::INFINITY, 0.0);
                        for a in 0..ni {
                            for b in 0..ni {
                                let (s2, t2) = (m.next(s, a), m.next(t, b));
                                let q2 = dfa.tau(q, label_finite(m, dfa.delta, s2, t2));
                                let d = self.ev(cert, q2, s2, t2) - here;
                                if d < best.0 {
                                    best =
                                        (d, self.mag(cert, q2, s2, t2) + self.mag(cert, q, s, t));
                                }
                            }
                        }
                        note(
                            self.pair_point(s, t),
                            violation(Rel::Lt, best.0, self.margin),
                            best.1,
                        );
                    }
                }
            }
        }
        match worst {
            Some((point, violation)) => FalsifyOutcome::Counterexample { point, violation },
            None => FalsifyOutcome::Proved,
        }
    }
}

/// Builds falsifier constraints for a continuous model.
pub struct ContinuousConditions<'a> {
    pub m: &'a ContinuousModel,
    pub dfa: &'a DeltaKDfa,
    pub part: LabelPartition,
    pub lay: Layout,
    succ: Vec<Polynomial>,
}

impl<'a> ContinuousConditions<'a> {
    pub fn new(m: &'a ContinuousModel, dfa: &'a DeltaKDfa) -> Self {
        let lay = Layout { n: m.n, m: m.m };
        let succ = lay.successor_maps(&m.f);
        ContinuousConditions {
            m,
            dfa,
            part: LabelPartition::new(m, dfa.delta),
            lay,
            succ,
        }
    }

    pub fn step_box(&self) -> BoxSet {
        self.m.x.times(&self.m.x).times(&self.m.u.times(&self.m.u))
    }

    pub fn init_domain(&self, q: usize) -> Vec<SemiAlgebraicSet> {
        let x0 = SemiAlgebraicSet::from_box(self.m.x0.times(&self.m.x0));
        self.part
            .guard(self.dfa, self.dfa.init(), q)
            .iter()
            .filter_map(|g| g.intersect(&x0))
            .collect()
    }

    /// Step-space pieces where the successor pair is labelled into `q2` from `q`.
    pub fn step_domain(&self, q: usize, q2: usize) -> Vec<SemiAlgebraicSet> {
        self.part
            .guard(self.dfa, q, q2)
            .iter()
            .map(|g| g.pullback(&self.succ, self.step_box()))
            .collect()
    }

    pub fn step_body(&self, cert: &Certificate, q: usize, q2: usize) -> Polynomial {
        cert.locations[q2]
            .compose(&self.succ)
            .sub(&self.lay.lift_pair(&cert.locations[q]))
    }

    pub fn universal(
        &self,
        cert: &Certificate,
        c: &Cond,
        vdom: Option<&VDomainInfo>,
    ) -> Option<UniversalConstraint> {
        let name = c.name(self.dfa);
        let r = SemiAlgebraicSet::from_box(self.m.x.times(&self.m.x));
        Some(match *c {
            Cond::Init { q } | Cond::VInit { q } => UniversalConstraint {
                name,
                domain: self.init_domain(q),
                body: cert.locations[q].clone(),
                rel: Rel::Le,
            },
            Cond::Accept => UniversalConstraint {
                name,
                domain: vec![r],
                body: cert.locations[self.dfa.accept()].clone(),
                rel: Rel::Gt,
            },
            Cond::Step { q, q2 } => UniversalConstraint {
                name,
                domain: self.step_domain(q, q2),
                body: self.step_body(cert, q, q2),
                rel: Rel::Le,
            },
            Cond::VOutside { q } => UniversalConstraint {
                name,
                domain: vdom
                    .map(|v| {
                        v.boxes
                            .iter()
                            .cloned()
                            .map(SemiAlgebraicSet::from_box)
                            .collect()
                    })
                    .unwrap_or_default(),
                body: cert.locations[q].clone(),
                rel: Rel::Gt,
            },
            _ => return None,
        })
    }

    pub fn decrease(&self, cert: &Certificate, q: usize) -> ForallExistsConstraint {
        let r = self.m.x.times(&self.m.x);
        let outer =
            vec![SemiAlgebraicSet::from_box(r.clone()).with(cert.locations[q].clone(), Rel::Le)];
        let cover = SemiAlgebraicSet::from_box(r).pullback(&self.succ, self.step_box());
        let mut branches = Vec::new();
        for q2 in self.dfa.nxt(q) {
            let body = self.step_body(cert, q, q2);
            for g in self.step_domain(q, q2) {
                branches.push(Branch {
                    guard: g,
                    body: body.clone(),
                });
            }
        }
        ForallExistsConstraint {
            name: format!("v-decrease[{}]", self.dfa.name(q)),
            outer,
            inner: self.m.u.times(&self.m.u),
            cover,
            branches,
        }
    }

    /// A point of `X0 × X0` not labelled into the trap, searched on a grid.
    pub fn nontrap_initial_pair(&self) -> Option<Vec<f64>> {
        let b = self.m.x0.times(&self.m.x0);
        let n = self.m.n;
        let mut pts = vec![b.center()];
        pts.extend(b.grid(5));
        pts.into_iter().find(|p| {
            self.dfa.tau(
                self.dfa.init(),
                label_continuous(self.m, self.dfa.delta, &p[..n], &p[n..]),
            ) != self.dfa.trap()
        })
    }

    pub fn check(
        &self,
        cert: &Certificate,
        c: &Cond,
        vdom: Option<&VDomainInfo>,
        mode: Mode,
        cfg: &FalsifierConfig,
    ) -> FalsifyOutcome {
        match *c {
            Cond::VInitNonempty => match self.nontrap_initial_pair() {
                Some(_) => FalsifyOutcome::Proved,
                None => FalsifyOutcome::NoneFound {
                    resolution: 0.0,
                    undecided: 1,
                    budget_exhausted: false,
                },
            },
            Cond::VDecrease { q } => run_forall_exists(&self.decrease(cert, q), cfg, mode).0,
            _ => {
                let u = self.universal(cert, c, vdom).expect("universal condition");
                if u.domain.is_empty() {
                    return FalsifyOutcome::Proved;
                }
                run_universal(&u, cfg, mode).0
            }
        }
    }
}
