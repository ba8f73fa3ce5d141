//! Interval branch-and-bound over semi-algebraic domains.
//!
//! Two questions are asked of a constraint `∀p ∈ D: body(p) rel 0`: find a
//! violating point (falsify), or show there is none (certify). Boxes are
//! processed widest first and always bisected along their widest dimension.
//! A box is settled when interval arithmetic excludes it from the domain or
//! proves the body relation on all of it; the centre of every unsettled box
//! is tested exactly for a violation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{BoxClass, BoxSet, Interval, Polynomial, Rel, SemiAlgebraicSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FalsifierConfig {
    /// boxes narrower than this are not split further
    pub eps_box: f64,
    /// budget of box expansions per condition, shared by its domain pieces
    pub max_boxes: usize,
    /// strict relations must hold with this much room
    pub margin: f64,
    /// a counterexample must violate by more than this
    pub violation_tol: f64,
    /// grid points per input dimension for existential checks
    pub input_grid: usize,
    pub serial: bool,
    /// falsify mode stops after this many counterexamples
    pub max_counterexamples: usize,
}

impl Default for FalsifierConfig {
    fn default() -> Self {
        FalsifierConfig {
            eps_box: 0.05,
            max_boxes: 200_000,
            margin: 1e-6,
            violation_tol: 1e-9,
            input_grid: 9,
            serial: true,
            max_counterexamples: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Falsify,
    Certify,
}

/// `∀p ∈ ∪domain: body(p) rel 0`.
#[derive(Debug, Clone)]
pub struct UniversalConstraint {
    pub name: String,
    pub domain: Vec<SemiAlgebraicSet>,
    pub body: Polynomial,
    pub rel: Rel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum FalsifyOutcome {
    Counterexample {
        point: Vec<f64>,
        violation: f64,
    },
    /// nothing found; `undecided` boxes remained at `resolution`
    NoneFound {
        resolution: f64,
        undecided: usize,
        budget_exhausted: bool,
    },
    Proved,
    /// existential checks passed on every box at the configured input grid
    GridValidated,
}

impl FalsifyOutcome {
    pub fn is_counterexample(&self) -> bool {
        matches!(self, FalsifyOutcome::Counterexample { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            FalsifyOutcome::Counterexample { .. } => "counterexample",
            FalsifyOutcome::NoneFound { .. } => "none-found",
            FalsifyOutcome::Proved => "proved",
            FalsifyOutcome::GridValidated => "grid-validated",
        }
    }
}

/// Amount by which `v` misses `rel` (positive means violated).
pub fn violation(rel: Rel, v: f64, margin: f64) -> f64 {
    match rel {
        Rel::Le => v,
        Rel::Lt => v + margin,
        Rel::Ge => -v,
        Rel::Gt => margin - v,
    }
}

/// Upper bound of the violation over an enclosure of the body.
fn violation_hi(rel: Rel, iv: Interval, margin: f64) -> f64 {
    match rel {
        Rel::Le => iv.hi,
        Rel::Lt => iv.hi + margin,
        Rel::Ge => -iv.lo,
        Rel::Gt => margin - iv.lo,
    }
}

struct Queued {
    width: f64,
    seq: u64,
    piece: usize,
    b: BoxSet,
}

impl PartialEq for Queued {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Queued {
    // widest first, then oldest first
    fn cmp(&self, o: &Self) -> Ordering {
        self.width
            .total_cmp(&o.width)
            .then_with(|| o.seq.cmp(&self.seq))
    }
}

/// Result of examining one box.
enum Step {
    Settled,
    Violation(Vec<f64>, f64),
    Split,
    Leaf,
}

/// Statistics and collected counterexamples of one run.
#[derive(Debug, Clone, Default)]
pub struct SearchReport {
    pub counterexamples: Vec<(Vec<f64>, f64)>,
    pub undecided: usize,
    pub expanded: usize,
    pub budget_exhausted: bool,
}

/// Generic branch-and-bound driver over the base boxes of all domain
/// pieces, widest box first. `examine` decides a single box of a piece.
fn search<F>(roots: Vec<BoxSet>, cfg: &FalsifierConfig, mode: Mode, examine: F) -> SearchReport
where
    F: Fn(usize, &BoxSet) -> Step + Sync,
{
    let mut rep = SearchReport::default();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for (piece, b) in roots.into_iter().enumerate() {
        heap.push(Queued {
            width: b.max_width(),
            seq,
            piece,
            b,
        });
        seq += 1;
    }
    let batch = if cfg.serial { 1 } else { 64 };
    while !heap.is_empty() {
        if rep.expanded >= cfg.max_boxes {
            rep.budget_exhausted = true;
            rep.undecided += heap.len();
            break;
        }
        let mut work = Vec::with_capacity(batch);
        while work.len() < batch {
            match heap.pop() {
                Some(q) => work.push((q.piece, q.b)),
                None => break,
            }
        }
        rep.expanded += work.len();
        let steps: Vec<Step> = if cfg.serial {
            work.iter().map(|(i, b)| examine(*i, b)).collect()
        } else {
            work.par_iter().map(|(i, b)| examine(*i, b)).collect()
        };
        for ((piece, b), st) in work.into_iter().zip(steps) {
            match st {
                Step::Settled => {}
                Step::Leaf => rep.undecided += 1,
                Step::Violation(p, v) => {
                    rep.counterexamples.push((p, v));
                    if mode == Mode::Certify || rep.counterexamples.len() >= cfg.max_counterexamples
                    {
                        return rep;
                    }
                    // violating boxes are not refined, so further counterexamples spread out
                }
                Step::Split => {
                    let d = b.widest_dim();
                    let (l, r) = b.bisect(d);
                    for c in [l, r] {
                        heap.push(Queued {
                            width: c.max_width(),
                            seq,
                            piece,
                            b: c,
                        });
                        seq += 1;
                    }
                }
            }
        }
    }
    rep
}

fn outcome_from(
    rep: &SearchReport,
    cfg: &FalsifierConfig,
    mode: Mode,
    proved: FalsifyOutcome,
) -> FalsifyOutcome {
    if let Some((p, v)) = rep.counterexamples.first() {
        return FalsifyOutcome::Counterexample {
            point: p.clone(),
            violation: *v,
        };
    }
    if mode == Mode::Certify && rep.undecided == 0 && !rep.budget_exhausted {
        return proved;
    }
    FalsifyOutcome::NoneFound {
        resolution: cfg.eps_box,
        undecided: rep.undecided,
        budget_exhausted: rep.budget_exhausted,
    }
}

fn examine_universal(
    c: &UniversalConstraint,
    piece: &SemiAlgebraicSet,
    b: &BoxSet,
    cfg: &FalsifierConfig,
) -> Step {
    let class = piece.classify(b);
    if class == BoxClass::Outside {
        return Step::Settled;
    }
    let body = c.body.interval_eval(&b.ivs);
    if violation_hi(c.rel, body, cfg.margin) <= 0.0 {
        return Step::Settled;
    }
    let p = b.center();
    if piece.contains(&p) {
        let v = violation(c.rel, c.body.eval_unchecked(&p), cfg.margin);
        if v > cfg.violation_tol {
            return Step::Violation(p, v);
        }
    }
    if b.max_width() > cfg.eps_box {
        Step::Split
    } else {
        Step::Leaf
    }
}

/// Runs the engine over all domain pieces with one shared budget.
pub fn run_universal(
    c: &UniversalConstraint,
    cfg: &FalsifierConfig,
    mode: Mode,
) -> (FalsifyOutcome, SearchReport) {
    let roots = c.domain.iter().map(|d| d.base.clone()).collect();
    let total = search(roots, cfg, mode, |i, b| {
        examine_universal(c, &c.domain[i], b, cfg)
    });
    debug_assert!(total.counterexamples.iter().all(|(p, _)| {
        c.domain.iter().any(|d| d.contains(p))
            && violation(c.rel, c.body.eval_unchecked(p), cfg.margin) > cfg.violation_tol
    }));
    (
        outcome_from(&total, cfg, mode, FalsifyOutcome::Proved),
        total,
    )
}

pub fn falsify(c: &UniversalConstraint, cfg: &FalsifierConfig) -> FalsifyOutcome {
    run_universal(c, cfg, Mode::Falsify).0
}

pub fn certify(c: &UniversalConstraint, resolution: f64, cfg: &FalsifierConfig) -> FalsifyOutcome {
    let cfg = FalsifierConfig {
        eps_box: resolution,
        ..cfg.clone()
    };
    run_universal(c, &cfg, Mode::Certify).0
}

/// One existential alternative: if the point `(outer, input)` lies in
/// `guard`, the alternative is satisfied when `body < 0` (with margin).
#[derive(Debug, Clone)]
pub struct Branch {
    pub guard: SemiAlgebraicSet,
    pub body: Polynomial,
}

/// `∀p ∈ outer ∃w ∈ grid(inner)`: the branch containing `(p, w)` has a
/// negative body. Points `(p, w)` outside `cover` admit no branch.
#[derive(Debug, Clone)]
pub struct ForallExistsConstraint {
    pub name: String,
    pub outer: Vec<SemiAlgebraicSet>,
    pub inner: BoxSet,
    pub cover: SemiAlgebraicSet,
    pub branches: Vec<Branch>,
}

impl ForallExistsConstraint {
    fn joined(p: &[f64], w: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(p.len() + w.len());
        z.extend_from_slice(p);
        z.extend_from_slice(w);
        z
    }

    /// Best (most negative) body over the grid at an exact point, or `None`
    /// when no grid input leads into the cover.
    pub fn best_decrease(&self, p: &[f64], grid: &[Vec<f64>]) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (wi, w) in grid.iter().enumerate() {
            let z = Self::joined(p, w);
            if !self.cover.contains(&z) {
                continue;
            }
            let mut worst = f64::NEG_INFINITY;
            let mut any = false;
            for br in &self.branches {
                if br.guard.contains(&z) {
                    any = true;
                    worst = worst.max(br.body.eval_unchecked(&z));
                }
            }
            if any && best.map(|(b, _)| worst < b).unwrap_or(true) {
                best = Some((worst, wi));
            }
        }
        best
    }

    fn box_proved_for(&self, b: &BoxSet, w: &[f64], margin: f64) -> bool {
        let mut ivs = b.ivs.clone();
        ivs.extend(w.iter().map(|&v| Interval::point(v)));
        let zb = BoxSet::new(ivs);
        if self.cover.classify(&zb) != BoxClass::Inside {
            return false;
        }
        self.branches.iter().all(|br| match br.guard.classify(&zb) {
            BoxClass::Outside => true,
            _ => br.body.interval_eval(&zb.ivs).hi <= -margin,
        })
    }
}

fn examine_fe(
    c: &ForallExistsConstraint,
    piece: &SemiAlgebraicSet,
    grid: &[Vec<f64>],
    b: &BoxSet,
    cfg: &FalsifierConfig,
) -> Step {
    if piece.classify(b) == BoxClass::Outside {
        return Step::Settled;
    }
    let p = b.center();
    // the grid scan dominates the cost, so it is skipped when the centre is outside the piece
    if !piece.contains(&p) {
        return if b.max_width() > cfg.eps_box {
            Step::Split
        } else {
            Step::Leaf
        };
    }
    let best = c.best_decrease(&p, grid);
    {
        let v = match best {
            None => f64::INFINITY,
            Some((d, _)) => d + cfg.margin,
        };
        if v > cfg.violation_tol {
            return Step::Violation(p, if v.is_finite() { v } else { f64::MAX });
        }
    }
    // try the grid inputs that look best at the centre
    if let Some((_, wi)) = best {
        if c.box_proved_for(b, &grid[wi], cfg.margin) {
            return Step::Settled;
        }
    }
    if b.max_width() > cfg.eps_box {
        Step::Split
    } else {
        Step::Leaf
    }
}

pub fn run_forall_exists(
    c: &ForallExistsConstraint,
    cfg: &FalsifierConfig,
    mode: Mode,
) -> (FalsifyOutcome, SearchReport) {
    let grid = c.inner.grid(cfg.input_grid);
    let roots = c.outer.iter().map(|d| d.base.clone()).collect();
    let total = search(roots, cfg, mode, |i, b| {
        examine_fe(c, &c.outer[i], &grid, b, cfg)
    });
    (
        outcome_from(&total, cfg, mode, FalsifyOutcome::GridValidated),
        total,
    )
}

pub fn falsify_forall_exists(c: &ForallExistsConstraint, cfg: &FalsifierConfig) -> FalsifyOutcome {
    run_forall_exists(c, cfg, Mode::Falsify).0
}
