//! Counterexample-guided synthesis of certificate coefficients.
//!
//! Each round fits a template to a finite bank of samples with a
//! margin-maximizing LP, then asks the checker for counterexamples and adds
//! them to the bank.

pub mod lp;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automaton::{label_continuous, label_finite, DeltaKDfa, Symbol};
use crate::certificate::{
    b_conditions, compute_pre_complement, v_conditions, CertKind, Certificate, CheckConfig,
    CheckReport, CheckVerdict, Cond, ContinuousConditions, FiniteChecker, Template, VDomainInfo,
};
use crate::falsifier::{run_forall_exists, run_universal, FalsifierConfig, FalsifyOutcome, Mode};
use crate::model::{BoxSet, SystemModel};
use lp::{maximize_margin, Row};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CegisConfig {
    /// state pairs sampled over `R`; `None` means 50 per pair dimension
    pub n_pairs: Option<usize>,
    /// input pairs sampled over `U × U`; `None` means 20 per pair dimension
    pub n_inputs: Option<usize>,
    /// initial pairs sampled over `X0 × X0`; `None` means 50 per pair dimension
    pub n_init: Option<usize>,
    /// input pairs tried per state pair in the B step rows
    pub inputs_per_pair: usize,
    /// grid points per input dimension for the V decrease alternatives
    pub v_input_grid: usize,
    pub eps: f64,
    pub eps_dec: f64,
    pub cmax: f64,
    pub i_max: usize,
    pub alternation_rounds: usize,
    pub lp_max_iter: usize,
    /// counterexamples kept per condition per round
    pub cex_per_condition: usize,
    /// box budget per condition in the search rounds; the final check uses the full budget
    pub round_max_boxes: usize,
    pub seed: u64,
    pub check: CheckConfig,
}

impl Default for CegisConfig {
    fn default() -> Self {
        CegisConfig {
            n_pairs: None,
            n_inputs: None,
            n_init: None,
            inputs_per_pair: 8,
            v_input_grid: 5,
            eps: 1e-3,
            eps_dec: 1e-3,
            cmax: 1e3,
            i_max: 200,
            alternation_rounds: 200,
            lp_max_iter: 200_000,
            cex_per_condition: 4,
            round_max_boxes: 20_000,
            seed: 0,
            check: CheckConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum CegisOutcome {
    /// passed the checker; `exhaustive` is false for continuous models,
    /// where it means no counterexample was found at the configured resolution
    Certified {
        exhaustive: bool,
    },
    TemplateInfeasible,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub pairs: usize,
    pub inputs: usize,
    pub rows: usize,
    pub margin: f64,
    pub counterexamples: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CegisResult {
    pub outcome: CegisOutcome,
    #[serde(skip)]
    pub certificate: Option<Certificate>,
    pub report: Option<CheckReport>,
    pub log: Vec<IterationLog>,
}

/// Latin-hypercube samples of a box: each dimension is cut into `count`
/// strata and every stratum is hit exactly once.
pub fn latin_hypercube<R: Rng>(rng: &mut R, b: &BoxSet, count: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(b.dim());
    for iv in &b.ivs {
        let mut perm: Vec<usize> = (0..count).collect();
        perm.shuffle(rng);
        cols.push(
            perm.into_iter()
                .map(|s| iv.lo + (s as f64 + rng.gen::<f64>()) / count as f64 * iv.width())
                .collect(),
        );
    }
    (0..count)
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect()
}

/// Uniform view of both model flavours for sampling purposes.
struct Sys<'a> {
    model: &'a SystemModel,
    dfa: DeltaKDfa,
    n: usize,
}

impl Sys<'_> {
    fn succ(&self, p: &[f64], w: &[f64]) -> Option<Vec<f64>> {
        let (n, m) = (self.n, w.len() / 2);
        let mut s = self.model.successor(&p[..n], &w[..m]).ok()?;
        s.extend(self.model.successor(&p[n..], &w[m..]).ok()?);
        if let SystemModel::Continuous(c) = self.model {
            if !c.x.contains(&s[..n]) || !c.x.contains(&s[n..]) {
                return None;
            }
        }
        Some(s)
    }

    fn label(&self, p: &[f64]) -> Symbol {
        let n = self.n;
        match self.model {
            SystemModel::Finite(f) => {
                let s = f.state_index(&p[..n]).expect("finite sample is a state");
                let t = f.state_index(&p[n..]).expect("finite sample is a state");
                label_finite(f, self.dfa.delta, s, t)
            }
            SystemModel::Continuous(c) => label_continuous(c, self.dfa.delta, &p[..n], &p[n..]),
        }
    }

    fn pairs_from(&self, pts: &[Vec<f64>], cap: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut all = Vec::new();
        for a in pts {
            for b in pts {
                let mut p = a.clone();
                p.extend_from_slice(b);
                all.push(p);
            }
        }
        if all.len() > cap {
            all.shuffle(rng);
            all.truncate(cap);
        }
        all
    }

    /// Initial (pairs, init pairs, input pairs) banks.
    fn initial_bank(
        &self,
        cfg: &CegisConfig,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let dim = 2 * self.n;
        let np = cfg.n_pairs.unwrap_or(50 * dim);
        let ni = cfg.n_init.unwrap_or(50 * dim);
        match self.model {
            SystemModel::Finite(f) => {
                let init: Vec<Vec<f64>> = f.initial.iter().map(|&s| f.states[s].clone()).collect();
                let ins = f.inputs.clone();
                let nu = cfg.n_inputs.unwrap_or(20 * 2 * ins[0].len());
                (
                    self.pairs_from(&f.states, np, rng),
                    self.pairs_from(&init, ni, rng),
                    self.pairs_from(&ins, nu.max(1), rng),
                )
            }
            SystemModel::Continuous(c) => {
                let nu = cfg.n_inputs.unwrap_or(20 * 2 * c.m);
                (
                    latin_hypercube(rng, &c.x.times(&c.x), np),
                    latin_hypercube(rng, &c.x0.times(&c.x0), ni),
                    latin_hypercube(rng, &c.u.times(&c.u), nu),
                )
            }
        }
    }

    /// Finite input-pair alternatives for V decrease.
    fn input_grid(&self, cfg: &CegisConfig) -> Vec<Vec<f64>> {
        match self.model {
            SystemModel::Finite(f) => {
                let mut out = Vec::new();
                for a in &f.inputs {
                    for b in &f.inputs {
                        let mut w = a.clone();
                        w.extend_from_slice(b);
                        out.push(w);
                    }
                }
                out
            }
            SystemModel::Continuous(c) => c.u.times(&c.u).grid(cfg.v_input_grid),
        }
    }

    fn init_location(&self, p: &[f64]) -> usize {
        self.dfa.tau(self.dfa.init(), self.label(p))
    }

    fn exhaustive(&self) -> bool {
        matches!(self.model, SystemModel::Finite(_))
    }
}

fn dot(row: &[(usize, f64)], c: &[f64]) -> f64 {
    row.iter().map(|&(j, v)| v * c[j]).sum()
}

fn mono_row(t: &Template, q: usize, p: &[f64], sign: f64) -> Vec<(usize, f64)> {
    let mut r = Vec::new();
    t.accumulate(&mut r, q, p, sign);
    r
}

/// Collected counterexamples for one condition (at most `cap`).
fn counterexamples(
    sys: &Sys,
    cert: &Certificate,
    cond: &Cond,
    vdom: Option<&VDomainInfo>,
    fcfg: &FalsifierConfig,
    cap: usize,
    round_max_boxes: usize,
) -> Vec<Vec<f64>> {
    match sys.model {
        SystemModel::Finite(f) => {
            let chk = FiniteChecker {
                m: f,
                dfa: &sys.dfa,
                margin: fcfg.margin,
                tol: fcfg.violation_tol,
            };
            match chk.check(cert, cond) {
                FalsifyOutcome::Counterexample { point, .. } => vec![point],
                _ => Vec::new(),
            }
        }
        SystemModel::Continuous(c) => {
            let ctx = ContinuousConditions::new(c, &sys.dfa);
            let cfg = FalsifierConfig {
                max_counterexamples: cap,
                max_boxes: fcfg.max_boxes.min(round_max_boxes),
                ..fcfg.clone()
            };
            let rep = match *cond {
                Cond::VDecrease { q } => {
                    run_forall_exists(&ctx.decrease(cert, q), &cfg, Mode::Falsify).1
                }
                Cond::VInitNonempty => return Vec::new(),
                _ => match ctx.universal(cert, cond, vdom) {
                    Some(u) if !u.domain.is_empty() => run_universal(&u, &cfg, Mode::Falsify).1,
                    _ => return Vec::new(),
                },
            };
            rep.counterexamples.into_iter().map(|(p, _)| p).collect()
        }
    }
}

/// Final verdict of a candidate; finite models are checked exhaustively.
fn final_check(sys: &Sys, cert: &Certificate, cfg: &CegisConfig) -> CheckReport {
    crate::certificate::check_certificate(sys.model, cert, Mode::Falsify, &cfg.check)
        .expect("shapes agree")
}

fn certified(rep: &CheckReport) -> bool {
    match rep.verdict {
        CheckVerdict::Valid => true,
        CheckVerdict::Invalid => false,
        // falsify-mode NoneFound: passed at the configured resolution
        CheckVerdict::Unknown => {
            !rep.exhaustive
                && rep
                    .conditions
                    .iter()
                    .all(|c| !c.outcome.is_counterexample())
        }
    }
}

/// Sample bank of the B loop.
#[derive(Debug, Clone, Default)]
pub struct BBank {
    pub pairs: Vec<Vec<f64>>,
    pub init_pairs: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    /// (pair, input pair) combinations that enter the step rows
    pub tuples: Vec<(usize, usize)>,
}

impl BBank {
    fn add_pair(&mut self, p: Vec<f64>, per_pair: usize, rng: &mut ChaCha8Rng) -> usize {
        let i = self.pairs.len();
        self.pairs.push(p);
        if self.inputs.len() <= per_pair {
            self.tuples.extend((0..self.inputs.len()).map(|j| (i, j)));
        } else {
            for j in rand::seq::index::sample(rng, self.inputs.len(), per_pair) {
                self.tuples.push((i, j));
            }
        }
        i
    }

    pub fn size(&self) -> usize {
        self.pairs.len() + self.init_pairs.len() + self.inputs.len()
    }
}

/// Linear rows of the B conditions on a bank.
pub fn b_rows(
    sys_model: &SystemModel,
    dfa: &DeltaKDfa,
    bank: &BBank,
    t: &Template,
    eps: f64,
    exclude_acc: bool,
) -> Vec<Row> {
    let sys = Sys {
        model: sys_model,
        dfa: dfa.clone(),
        n: sys_model.state_dim(),
    };
    let mut rows = Vec::new();
    for p in &bank.init_pairs {
        rows.push(Row {
            a: mono_row(t, sys.init_location(p), p, 1.0),
            b: 0.0,
        });
    }
    for p in &bank.pairs {
        rows.push(Row {
            a: mono_row(t, dfa.accept(), p, -1.0),
            b: -eps,
        });
    }
    for &(i, j) in &bank.tuples {
        let p = &bank.pairs[i];
        let Some(s) = sys.succ(p, &bank.inputs[j]) else {
            continue;
        };
        let sigma = sys.label(&s);
        for q in 0..dfa.num_states() {
            if q == dfa.trap() || (exclude_acc && q == dfa.accept()) {
                continue;
            }
            let q2 = dfa.tau(q, sigma);
            let mut a = mono_row(t, q2, &s, 1.0);
            t.accumulate(&mut a, q, p, -1.0);
            rows.push(Row { a, b: 0.0 });
        }
    }
    rows
}

/// Margin-maximizing fit of a B template; `None` when the sampled rows are infeasible.
pub fn fit_b_coefficients(
    rows: &[Row],
    t: &Template,
    delta: f64,
    cfg: &CegisConfig,
) -> (Option<Certificate>, f64) {
    let sol = maximize_margin(t.num_coeffs(), rows, cfg.cmax, 1.0, cfg.lp_max_iter);
    let cert = t.instantiate(CertKind::B, delta, &sol.c);
    if sol.margin >= -1e-9 {
        (Some(cert), sol.margin)
    } else {
        (None, sol.margin)
    }
}

pub fn synthesize_b(
    model: &SystemModel,
    delta: f64,
    k: usize,
    t: &Template,
    cfg: &CegisConfig,
) -> CegisResult {
    let dfa = DeltaKDfa::new(delta, k).expect("valid automaton parameters");
    let sys = Sys {
        model,
        dfa: dfa.clone(),
        n: model.state_dim(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (pairs, init_pairs, inputs) = sys.initial_bank(cfg, &mut rng);
    let mut bank = BBank {
        pairs: Vec::new(),
        init_pairs,
        inputs,
        tuples: Vec::new(),
    };
    for p in pairs {
        bank.add_pair(p, cfg.inputs_per_pair, &mut rng);
    }
    let conds = b_conditions(&dfa, cfg.check.exclude_accepting_decrease);
    let mut log = Vec::new();
    let n = sys.n;
    let full = cfg.check.falsifier.max_boxes;
    let mut budget = cfg.round_max_boxes.min(full);
    for it in 0..cfg.i_max {
        let rows = b_rows(
            model,
            &dfa,
            &bank,
            t,
            cfg.eps,
            cfg.check.exclude_accepting_decrease,
        );
        let (cert, margin) = fit_b_coefficients(&rows, t, delta, cfg);
        let mut entry = IterationLog {
            iteration: it,
            pairs: bank.pairs.len() + bank.init_pairs.len(),
            inputs: bank.inputs.len(),
            rows: rows.len(),
            margin,
            counterexamples: Vec::new(),
        };
        let Some(cert) = cert else {
            log.push(entry);
            return CegisResult {
                outcome: CegisOutcome::TemplateInfeasible,
                certificate: None,
                report: None,
                log,
            };
        };
        let before = bank.size() + bank.tuples.len();
        for c in &conds {
            for p in counterexamples(
                &sys,
                &cert,
                c,
                None,
                &cfg.check.falsifier,
                cfg.cex_per_condition,
                budget,
            ) {
                entry.counterexamples.push((c.name(&dfa), p.clone()));
                match c {
                    Cond::Init { .. } => bank.init_pairs.push(p),
                    Cond::Step { .. } => {
                        let w = p[2 * n..].to_vec();
                        let j = bank.inputs.len();
                        bank.inputs.push(w);
                        let i = bank.add_pair(p[..2 * n].to_vec(), cfg.inputs_per_pair, &mut rng);
                        bank.tuples.push((i, j));
                    }
                    _ => {
                        bank.add_pair(p, cfg.inputs_per_pair, &mut rng);
                    }
                }
            }
        }
        let found = !entry.counterexamples.is_empty();
        log.push(entry);
        // a quiet round at the reduced budget is repeated at the full one before the final check
        if !found && budget < full {
            budget = full;
            continue;
        }
        budget = cfg.round_max_boxes.min(full);
        if !found {
            let report = final_check(&sys, &cert, cfg);
            if certified(&report) {
                return CegisResult {
                    outcome: CegisOutcome::Certified {
                        exhaustive: sys.exhaustive(),
                    },
                    certificate: Some(cert),
                    report: Some(report),
                    log,
                };
            }
            return CegisResult {
                outcome: CegisOutcome::Budget,
                certificate: Some(cert),
                report: Some(report),
                log,
            };
        }
        debug_assert!(bank.size() + bank.tuples.len() > before);
    }
    CegisResult {
        outcome: CegisOutcome::Budget,
        certificate: None,
        report: None,
        log,
    }
}

/// A V sample `(q, pair)` with its alternatives: index 0 keeps `V_q >= eps`,
/// the others are decreases under one input pair of the grid.
#[derive(Debug, Clone)]
struct VSample {
    q: usize,
    pair: Vec<f64>,
    /// (input index, successor location, successor pair)
    moves: Vec<(usize, usize, Vec<f64>)>,
    choice: usize,
}

struct VFit<'a> {
    t: &'a Template,
    dfa: &'a DeltaKDfa,
    eps: f64,
    eps_dec: f64,
}

impl VFit<'_> {
    fn option_row(&self, s: &VSample, o: usize) -> Row {
        if o == 0 {
            return Row {
                a: mono_row(self.t, s.q, &s.pair, -1.0),
                b: -self.eps,
            };
        }
        let (_, q2, ref succ) = s.moves[o - 1];
        let mut a = mono_row(self.t, q2, succ, 1.0);
        self.t.accumulate(&mut a, s.q, &s.pair, -1.0);
        Row {
            a,
            b: -self.eps_dec,
        }
    }

    fn slack(&self, s: &VSample, o: usize, c: &[f64]) -> f64 {
        let r = self.option_row(s, o);
        r.b - dot(&r.a, c)
    }

    /// Decrease with the best automaton progress, then the largest slack.
    fn best_decrease(&self, s: &VSample, c: &[f64]) -> usize {
        let mut best = 0;
        let mut key = (i64::MIN, f64::NEG_INFINITY);
        for o in 1..=s.moves.len() {
            let k = (self.dfa.progress(s.moves[o - 1].1), self.slack(s, o, c));
            if k.0 > key.0 || (k.0 == key.0 && k.1 > key.1) {
                key = k;
                best = o;
            }
        }
        best
    }
}

fn v_sample(sys: &Sys, q: usize, pair: Vec<f64>, grid: &[Vec<f64>], t: &Template) -> VSample {
    let mut moves = Vec::new();
    for (wi, w) in grid.iter().enumerate() {
        let Some(s) = sys.succ(&pair, w) else {
            continue;
        };
        let q2 = sys.dfa.tau(q, sys.label(&s));
        // a move back onto the same sample gives an identically zero row
        if q2 == q && s == pair {
            continue;
        }
        let mut a = mono_row(t, q2, &s, 1.0);
        t.accumulate(&mut a, q, &pair, -1.0);
        let probe = Row { a, b: 0.0 };
        if lp::margin_of(&[probe], &vec![0.0; t.num_coeffs()]) == f64::INFINITY {
            continue;
        }
        moves.push((wi, q2, s));
    }
    VSample {
        q,
        pair,
        moves,
        choice: 0,
    }
}

/// Sample bank of the V loop.
#[derive(Debug, Clone, Default)]
pub struct VBank {
    init_pairs: Vec<(usize, Vec<f64>)>,
    outside: Vec<(usize, Vec<f64>)>,
    samples: Vec<VSample>,
}

impl VBank {
    pub fn size(&self) -> usize {
        self.init_pairs.len() + self.outside.len() + self.samples.len()
    }
}

/// Alternating fit: each sample's disjunct is fixed, the LP is solved, and
/// samples whose chosen row is violated switch to a better disjunct.
fn fit_v(
    bank: &mut VBank,
    fit: &VFit,
    delta: f64,
    cfg: &CegisConfig,
) -> (Option<Certificate>, f64, usize) {
    let nc = fit.t.num_coeffs();
    let mut fixed = Vec::new();
    for (q, p) in &bank.init_pairs {
        fixed.push(Row {
            a: mono_row(fit.t, *q, p, 1.0),
            b: 0.0,
        });
    }
    for (q, p) in &bank.outside {
        fixed.push(Row {
            a: mono_row(fit.t, *q, p, -1.0),
            b: -fit.eps,
        });
    }
    // successor sample of every move, if that sample is in the bank
    let key = |q: usize, p: &[f64]| (q, p.iter().map(|v| v.to_bits()).collect::<Vec<u64>>());
    let index: HashMap<(usize, Vec<u64>), usize> = bank
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| (key(s.q, &s.pair), i))
        .collect();
    let targets: Vec<Vec<Option<usize>>> = bank
        .samples
        .iter()
        .map(|s| {
            s.moves
                .iter()
                .map(|(_, q2, p2)| index.get(&key(*q2, p2)).copied())
                .collect()
        })
        .collect();
    let roots: Vec<usize> = bank
        .init_pairs
        .iter()
        .filter_map(|(q, p)| index.get(&key(*q, p)).copied())
        .collect();
    let mut c = vec![0.0; nc];
    let mut last = (c.clone(), f64::NEG_INFINITY, 0);
    for _round in 0..cfg.alternation_rounds {
        // a decreasing sample pushes its successor below zero, so that
        // successor cannot stay exempt either
        let mut forced = vec![false; bank.samples.len()];
        let mut stack = roots.clone();
        while let Some(i) = stack.pop() {
            if forced[i] {
                continue;
            }
            forced[i] = true;
            if bank.samples[i].choice == 0 {
                bank.samples[i].choice = fit.best_decrease(&bank.samples[i], &c);
            }
            let ch = bank.samples[i].choice;
            if ch > 0 {
                if let Some(j) = targets[i][ch - 1] {
                    stack.push(j);
                }
            }
        }
        let mut rows = fixed.clone();
        rows.extend(bank.samples.iter().map(|s| fit.option_row(s, s.choice)));
        let sol = maximize_margin(nc, &rows, cfg.cmax, 1.0, cfg.lp_max_iter);
        c = sol.c.clone();
        last = (sol.c.clone(), sol.margin, rows.len());
        if sol.margin >= -1e-9 {
            break;
        }
        let mut changed = 0;
        for (i, s) in bank.samples.iter_mut().enumerate() {
            if fit.slack(s, s.choice, &c) >= -1e-9 {
                continue;
            }
            let first = if forced[i] { 1 } else { 0 };
            let next = if s.choice == 0 {
                fit.best_decrease(s, &c)
            } else {
                (first..=s.moves.len())
                    .max_by(|&a, &b| fit.slack(s, a, &c).total_cmp(&fit.slack(s, b, &c)))
                    .unwrap_or(0)
            };
            if next != s.choice {
                s.choice = next;
                changed += 1;
            }
        }
        if changed == 0 {
            break;
        }
    }
    let (c, margin, nrows) = last;
    let cert = fit.t.instantiate(CertKind::V, delta, &c);
    if margin >= -1e-9 {
        (Some(cert), margin, nrows)
    } else {
        (None, margin, nrows)
    }
}

pub fn synthesize_v(
    model: &SystemModel,
    delta: f64,
    k: usize,
    t: &Template,
    vdom: Option<&VDomainInfo>,
    cfg: &CegisConfig,
) -> CegisResult {
    let dfa = DeltaKDfa::new(delta, k).expect("valid automaton parameters");
    let sys = Sys {
        model,
        dfa: dfa.clone(),
        n: model.state_dim(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = sys.input_grid(cfg);
    let computed;
    let vdom = match (model, vdom) {
        (SystemModel::Continuous(c), None) => {
            computed = compute_pre_complement(c, cfg.check.pre_resolution, cfg.check.pre_max_boxes);
            Some(&computed)
        }
        (_, v) => v,
    };
    let (pairs, init_pairs, _) = sys.initial_bank(cfg, &mut rng);
    let fit = VFit {
        t,
        dfa: &dfa,
        eps: cfg.eps,
        eps_dec: cfg.eps_dec,
    };
    let mut bank = VBank::default();
    let zero = vec![0.0; t.num_coeffs()];
    let add_init = |bank: &mut VBank, p: Vec<f64>| {
        let q = sys.init_location(&p);
        if q == dfa.trap() {
            return;
        }
        let mut s = v_sample(&sys, q, p.clone(), &grid, t);
        s.choice = fit.best_decrease(&s, &zero);
        bank.samples.push(s);
        bank.init_pairs.push((q, p));
    };
    for p in init_pairs {
        add_init(&mut bank, p);
    }
    if bank.init_pairs.is_empty() {
        return CegisResult {
            outcome: CegisOutcome::TemplateInfeasible,
            certificate: None,
            report: None,
            log: Vec::new(),
        };
    }
    for p in pairs {
        for q in 0..dfa.num_states() {
            if q != dfa.accept() && !bank.samples.iter().any(|s| s.q == q && s.pair == p) {
                bank.samples.push(v_sample(&sys, q, p.clone(), &grid, t));
            }
        }
    }
    if let Some(v) = vdom {
        for b in v.boxes.iter().take(50 * 2 * sys.n) {
            for q in 0..dfa.num_states() {
                if q != dfa.accept() {
                    bank.outside.push((q, b.center()));
                }
            }
        }
    }
    let conds = v_conditions(&dfa);
    let mut log = Vec::new();
    let full = cfg.check.falsifier.max_boxes;
    let mut budget = cfg.round_max_boxes.min(full);
    for it in 0..cfg.i_max {
        let (cert, margin, nrows) = fit_v(&mut bank, &fit, delta, cfg);
        let mut entry = IterationLog {
            iteration: it,
            pairs: bank.size(),
            inputs: grid.len(),
            rows: nrows,
            margin,
            counterexamples: Vec::new(),
        };
        let Some(cert) = cert else {
            log.push(entry);
            return CegisResult {
                outcome: CegisOutcome::TemplateInfeasible,
                certificate: None,
                report: None,
                log,
            };
        };
        for c in &conds {
            for p in counterexamples(
                &sys,
                &cert,
                c,
                vdom,
                &cfg.check.falsifier,
                cfg.cex_per_condition,
                budget,
            ) {
                entry.counterexamples.push((c.name(&dfa), p.clone()));
                match *c {
                    Cond::VInit { .. } => add_init(&mut bank, p),
                    Cond::VOutside { q } => bank.outside.push((q, p)),
                    Cond::VDecrease { q } => {
                        let mut s = v_sample(&sys, q, p, &grid, t);
                        s.choice = fit.best_decrease(&s, &cert_coeffs(&cert, t));
                        bank.samples.push(s);
                    }
                    _ => {}
                }
            }
        }
        let found = !entry.counterexamples.is_empty();
        log.push(entry);
        // a quiet round at the reduced budget is repeated at the full one before the final check
        if !found && budget < full {
            budget = full;
            continue;
        }
        budget = cfg.round_max_boxes.min(full);
        if !found {
            let mut check = cfg.check.clone();
            check.exclude_accepting_decrease = false;
            let report = final_check(
                &sys,
                &cert,
                &CegisConfig {
                    check,
                    ..cfg.clone()
                },
            );
            let outcome = if certified(&report) {
                CegisOutcome::Certified {
                    exhaustive: sys.exhaustive(),
                }
            } else {
                CegisOutcome::Budget
            };
            return CegisResult {
                outcome,
                certificate: Some(cert),
                report: Some(report),
                log,
            };
        }
    }
    CegisResult {
        outcome: CegisOutcome::Budget,
        certificate: None,
        report: None,
        log,
    }
}

/// Coefficient vector of a certificate in template layout.
fn cert_coeffs(cert: &Certificate, t: &Template) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.num_coeffs());
    for (q, ms) in t.monos.iter().enumerate() {
        for e in ms {
            out.push(cert.locations[q].coeff(e));
        }
    }
    out
}
