//! Product of the self-composed system with the (δ,K)-automaton, and the exact
//! decision procedure for finite systems: a system is diagnosable iff the
//! accepting location is unreachable in the product.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{label_continuous, label_finite, DeltaKDfa, Symbol};
use crate::model::{FiniteModel, ModelError, SystemModel};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("the exact oracle only handles finite models")]
    NotFinite,
    #[error("horizon {given} below the safe bound {needed}")]
    HorizonTooSmall { given: usize, needed: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Automaton(#[from] crate::automaton::AutomatonError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductState {
    pub x: Vec<f64>,
    pub xh: Vec<f64>,
    pub q: usize,
}

/// Two runs of equal length driven by their own inputs. `u_run[k]` moves
/// step `k` to step `k+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x_run: Vec<Vec<f64>>,
    pub xh_run: Vec<Vec<f64>>,
    pub u_run: Vec<Vec<f64>>,
    pub uh_run: Vec<Vec<f64>>,
    /// first step at which the x-run is faulty
    pub fault_step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub diagnosable: bool,
    pub witness: Option<Witness>,
}

fn label_any(model: &SystemModel, delta: f64, x: &[f64], xh: &[f64]) -> Result<Symbol, ModelError> {
    match model {
        SystemModel::Continuous(c) => {
            if !c.x.contains(x) || !c.x.contains(xh) {
                return Err(ModelError::Domain(
                    "successor pair left the state set".into(),
                ));
            }
            Ok(label_continuous(c, delta, x, xh))
        }
        SystemModel::Finite(f) => {
            let s = f
                .state_index(x)
                .ok_or_else(|| ModelError::Domain(format!("{x:?} is not a state")))?;
            let t = f
                .state_index(xh)
                .ok_or_else(|| ModelError::Domain(format!("{xh:?} is not a state")))?;
            Ok(label_finite(f, delta, s, t))
        }
    }
}

/// One synchronous step of the product.
pub fn product_step(
    model: &SystemModel,
    dfa: &DeltaKDfa,
    s: &ProductState,
    u: &[f64],
    uh: &[f64],
) -> Result<ProductState, ModelError> {
    let x = model.successor(&s.x, u)?;
    let xh = model.successor(&s.xh, uh)?;
    let sym = label_any(model, dfa.delta, &x, &xh)?;
    let q = dfa.tau(s.q, sym);
    Ok(ProductState { x, xh, q })
}

/// Product state for an initial pair.
pub fn initial_product_state(
    model: &SystemModel,
    dfa: &DeltaKDfa,
    x0: &[f64],
    xh0: &[f64],
) -> Result<ProductState, ModelError> {
    let sym = label_any(model, dfa.delta, x0, xh0)?;
    Ok(ProductState {
        x: x0.to_vec(),
        xh: xh0.to_vec(),
        q: dfa.tau(dfa.init(), sym),
    })
}

/// All initial product states of a finite model as `(s, t, q)` index triples.
pub fn initial_product_states(m: &FiniteModel, dfa: &DeltaKDfa) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for &s in &m.initial {
        for &t in &m.initial {
            out.push((s, t, dfa.tau(dfa.init(), label_finite(m, dfa.delta, s, t))));
        }
    }
    out
}

/// Breadth-first search of the finite product for the accepting location.
pub fn verify_exact(model: &SystemModel, delta: f64, k: usize) -> Result<Verdict, OracleError> {
    let m = model.as_finite().ok_or(OracleError::NotFinite)?;
    let dfa = DeltaKDfa::new(delta, k)?;
    Ok(verify_finite(m, &dfa))
}

pub fn verify_finite(m: &FiniteModel, dfa: &DeltaKDfa) -> Verdict {
    let ns = m.num_states();
    let nq = dfa.num_states();
    let ni = m.num_inputs();
    let id = |s: usize, t: usize, q: usize| (s * ns + t) * nq + q;
    let total = ns * ns * nq;
    // parent: (previous id, input of x, input of xh)
    let mut parent: Vec<Option<(usize, usize, usize)>> = vec![None; total];
    let mut seen = vec![false; total];
    let mut queue = VecDeque::new();
    for (s, t, q) in initial_product_states(m, dfa) {
        let i = id(s, t, q);
        if !seen[i] {
            seen[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(cur) = queue.pop_front() {
        let q = cur % nq;
        let t = (cur / nq) % ns;
        let s = cur / nq / ns;
        if q == dfa.accept() {
            return Verdict {
                diagnosable: false,
                witness: Some(rebuild(m, dfa, cur, &parent)),
            };
        }
        if q == dfa.trap() {
            continue;
        }
        for a in 0..ni {
            for b in 0..ni {
                let s2 = m.next(s, a);
                let t2 = m.next(t, b);
                let q2 = dfa.tau(q, label_finite(m, dfa.delta, s2, t2));
                let j = id(s2, t2, q2);
                if !seen[j] {
                    seen[j] = true;
                    parent[j] = Some((cur, a, b));
                    queue.push_back(j);
                }
            }
        }
    }
    Verdict {
        diagnosable: true,
        witness: None,
    }
}

fn rebuild(
    m: &FiniteModel,
    dfa: &DeltaKDfa,
    end: usize,
    parent: &[Option<(usize, usize, usize)>],
) -> Witness {
    let ns = m.num_states();
    let nq = dfa.num_states();
    let mut ids = vec![end];
    let mut ins = Vec::new();
    let mut cur = end;
    while let Some((p, a, b)) = parent[cur] {
        ids.push(p);
        ins.push((a, b));
        cur = p;
    }
    ids.reverse();
    ins.reverse();
    let x_run: Vec<Vec<f64>> = ids.iter().map(|&i| m.states[i / nq / ns].clone()).collect();
    let xh_run: Vec<Vec<f64>> = ids
        .iter()
        .map(|&i| m.states[(i / nq) % ns].clone())
        .collect();
    let fault_step = ids
        .iter()
        .position(|&i| m.is_faulty_idx(i / nq / ns))
        .unwrap_or(0);
    Witness {
        x_run,
        xh_run,
        u_run: ins.iter().map(|&(a, _)| m.inputs[a].clone()).collect(),
        uh_run: ins.iter().map(|&(_, b)| m.inputs[b].clone()).collect(),
        fault_step,
    }
}

/// Checks a witness directly against the definition: the x-run first enters
/// the faulty set at `k`, the shadow run stays fault-free on `[0, k+K]`, and
/// outputs stay within δ on that window. Runs must follow the dynamics.
pub fn witness_is_valid(model: &SystemModel, delta: f64, k: usize, w: &Witness) -> bool {
    let len = w.x_run.len();
    if w.xh_run.len() != len || w.u_run.len() + 1 != len || w.uh_run.len() + 1 != len {
        return false;
    }
    let end = w.fault_step + k;
    if end >= len {
        return false;
    }
    let (faulty, output, initial): (
        Box<dyn Fn(&[f64]) -> bool>,
        Box<dyn Fn(&[f64]) -> Vec<f64>>,
        Box<dyn Fn(&[f64]) -> bool>,
    ) = match model {
        SystemModel::Continuous(c) => (
            Box::new(move |x: &[f64]| c.is_faulty(x)),
            Box::new(move |x: &[f64]| c.output(x)),
            Box::new(move |x: &[f64]| c.x0.contains(x)),
        ),
        SystemModel::Finite(f) => (
            Box::new(move |x: &[f64]| {
                f.state_index(x)
                    .map(|i| f.is_faulty_idx(i))
                    .unwrap_or(false)
            }),
            Box::new(move |x: &[f64]| {
                f.state_index(x)
                    .map(|i| f.output[i].clone())
                    .unwrap_or_default()
            }),
            Box::new(move |x: &[f64]| {
                f.state_index(x)
                    .map(|i| f.initial.contains(&i))
                    .unwrap_or(false)
            }),
        ),
    };
    if !initial(&w.x_run[0]) || !initial(&w.xh_run[0]) {
        return false;
    }
    for i in 0..len - 1 {
        let nx = model.successor(&w.x_run[i], &w.u_run[i]);
        let nxh = model.successor(&w.xh_run[i], &w.uh_run[i]);
        match (nx, nxh) {
            (Ok(a), Ok(b)) if close(&a, &w.x_run[i + 1]) && close(&b, &w.xh_run[i + 1]) => {}
            _ => return false,
        }
    }
    if (0..w.fault_step).any(|i| faulty(&w.x_run[i])) || !faulty(&w.x_run[w.fault_step]) {
        return false;
    }
    for i in 0..=end {
        if faulty(&w.xh_run[i]) {
            return false;
        }
        let a = output(&w.x_run[i]);
        let b = output(&w.xh_run[i]);
        let d2: f64 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum();
        if d2 > delta * delta + crate::automaton::tie_tol(delta) {
            return false;
        }
    }
    true
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(p, q)| (p - q).abs() <= 1e-9 * (1.0 + p.abs()))
}

/// Smallest horizon accepted by [`definitional_check`].
pub fn safe_horizon(m: &FiniteModel, k: usize) -> usize {
    m.num_states() * m.num_states() * (k + 3)
}

/// Brute-force search over pairs of runs, written straight from the
/// definition and independent of the automaton. Pairs of runs are explored
/// depth-first up to `horizon`; a pair state is revisited only when reached
/// at a smaller depth.
pub fn definitional_check(
    m: &FiniteModel,
    delta: f64,
    k: usize,
    horizon: usize,
) -> Result<Verdict, OracleError> {
    let needed = safe_horizon(m, k);
    if horizon < needed {
        return Err(OracleError::HorizonTooSmall {
            given: horizon,
            needed,
        });
    }
    let close = |s: usize, t: usize| {
        let d2: f64 = m.output[s]
            .iter()
            .zip(&m.output[t])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        d2 <= delta * delta + crate::automaton::tie_tol(delta)
    };
    // phase: 0 = no fault yet, j+1 = j steps after the fault step
    let mut best_depth: std::collections::HashMap<(usize, usize, usize), usize> =
        Default::default();
    let mut stack: Vec<(usize, usize, usize, usize)> = Vec::new();
    for &s in &m.initial {
        for &t in &m.initial {
            stack.push((s, t, 0, 0));
        }
    }
    while let Some((s, t, phase, depth)) = stack.pop() {
        // the shadow run must stay fault-free and close for the pair to remain a candidate
        if m.is_faulty_idx(t) || !close(s, t) {
            continue;
        }
        let phase = if phase == 0 && m.is_faulty_idx(s) {
            1
        } else {
            phase
        };
        if phase == k + 1 {
            return Ok(Verdict {
                diagnosable: false,
                witness: None,
            });
        }
        if depth >= horizon {
            continue;
        }
        if let Some(&d) = best_depth.get(&(s, t, phase)) {
            if d <= depth {
                continue;
            }
        }
        best_depth.insert((s, t, phase), depth);
        let next_phase = if phase == 0 { 0 } else { phase + 1 };
        for a in 0..m.num_inputs() {
            for b in 0..m.num_inputs() {
                stack.push((m.next(s, a), m.next(t, b), next_phase, depth + 1));
            }
        }
    }
    Ok(Verdict {
        diagnosable: true,
        witness: None,
    })
}

/// Random finite model for property tests: 1-D states on a coarse lattice so
/// that output distances hit δ exactly now and then.
pub fn random_finite_model<R: Rng>(
    rng: &mut R,
    max_states: usize,
    max_inputs: usize,
) -> FiniteModel {
    let ns = rng.gen_range(1..=max_states);
    let ni = rng.gen_range(1..=max_inputs);
    let states: Vec<Vec<f64>> = (0..ns)
        .map(|i| vec![2.0 * i as f64 + rng.gen_range(0..4) as f64 * 0.5])
        .collect();
    let mut triples = Vec::new();
    for s in 0..ns {
        for i in 0..ni {
            triples.push([s, i, rng.gen_range(0..ns)]);
        }
    }
    let mut initial: Vec<usize> = (0..ns).filter(|_| rng.gen_bool(0.3)).collect();
    if initial.is_empty() {
        initial.push(0);
    }
    let faulty: Vec<usize> = (0..ns).filter(|_| rng.gen_bool(0.3)).collect();
    let inputs = (0..ni).map(|i| vec![i as f64]).collect();
    let output = states.clone();
    FiniteModel::new(states, initial, faulty, inputs, &triples, output)
        .expect("generated model is well formed")
}

/// Distinct reachable product states of a finite model (used in reports).
pub fn reachable_count(m: &FiniteModel, dfa: &DeltaKDfa) -> usize {
    let mut seen = HashSet::new();
    let mut queue: VecDeque<(usize, usize, usize)> =
        initial_product_states(m, dfa).into_iter().collect();
    for s in &queue {
        seen.insert(*s);
    }
    while let Some((s, t, q)) = queue.pop_front() {
        for a in 0..m.num_inputs() {
            for b in 0..m.num_inputs() {
                let s2 = m.next(s, a);
                let t2 = m.next(t, b);
                let nxt = (s2, t2, dfa.tau(q, label_finite(m, dfa.delta, s2, t2)));
                if seen.insert(nxt) {
                    queue.push_back(nxt);
                }
            }
        }
    }
    seen.len()
}
