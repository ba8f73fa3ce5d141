//! Online fault diagnoser.
//!
//! Tracks `M(k)`, the non-faulty states consistent with every observation so
//! far. A fault is reported the first time `M(k)` becomes empty. Finite models
//! use the exact set; continuous models use a point cloud of reachable
//! states, an inner approximation that can only empty out earlier.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::tie_tol;
use crate::model::{ContinuousModel, FiniteModel, ModelError, SystemModel};

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("diagnoser already reported a fault at step {0}")]
    Terminated(usize),
    #[error("observation at step {k} has {got} components, the model outputs {want}")]
    ObservationArity { k: usize, got: usize, want: usize },
    #[error("simulation left the state set at step {step}: {source}")]
    Simulation { step: usize, source: ModelError },
    #[error("malformed observation line {line}: {msg}")]
    Stream { line: usize, msg: String },
}

/// One imprecise measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub k: usize,
    pub y: Vec<f64>,
}

/// Parses JSON-lines `{"k":..,"y":[..]}`; blank lines are skipped.
pub fn parse_stream(text: &str) -> Result<Vec<Observation>, DiagError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let o: Observation = serde_json::from_str(line).map_err(|e| DiagError::Stream {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(o);
    }
    Ok(out)
}

pub fn stream_to_string(obs: &[Observation]) -> String {
    let mut s = String::new();
    for o in obs {
        s.push_str(&serde_json::to_string(o).expect("observations serialize"));
        s.push('\n');
    }
    s
}

/// Tuning of the point-cloud backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// grid points per dimension seeding `M(0)` from `X0`
    pub init_per_dim: usize,
    /// grid points per input dimension for the forward image
    pub input_grid: usize,
    /// points closer than this (per coordinate) are merged
    pub cell: f64,
    pub max_points: usize,
    /// below this many points the cloud is re-densified by jitter
    pub floor: usize,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            init_per_dim: 21,
            input_grid: 5,
            cell: 0.01,
            max_points: 4000,
            floor: 200,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum DiagVerdict {
    Running,
    /// the fault happened within `[from, to]`
    FaultDetected {
        from: usize,
        to: usize,
        /// `M(0)` was already empty: no fault-free initial state explains `y0`
        inconsistent_at_start: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MSet {
    Exact(BTreeSet<usize>),
    Cloud(Vec<Vec<f64>>),
}

impl MSet {
    pub fn len(&self) -> usize {
        match self {
            MSet::Exact(s) => s.len(),
            MSet::Cloud(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct DiagnoserState {
    pub k: usize,
    pub delta: f64,
    pub horizon: usize,
    pub m: MSet,
    pub verdict: DiagVerdict,
    grid: GridConfig,
    rng: ChaCha8Rng,
}

fn close(h: &[f64], y: &[f64], delta: f64) -> bool {
    let d2: f64 = h.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    d2 <= delta * delta + tie_tol(delta)
}

fn check_arity(model: &SystemModel, k: usize, y: &[f64]) -> Result<(), DiagError> {
    let want = match model {
        SystemModel::Finite(f) => f.output[0].len(),
        SystemModel::Continuous(c) => c.q_out(),
    };
    if y.len() != want {
        return Err(DiagError::ObservationArity {
            k,
            got: y.len(),
            want,
        });
    }
    Ok(())
}

fn exact_filter(
    m: &FiniteModel,
    cand: impl IntoIterator<Item = usize>,
    y: &[f64],
    delta: f64,
) -> BTreeSet<usize> {
    cand.into_iter()
        .filter(|&s| !m.is_faulty_idx(s) && close(&m.output[s], y, delta))
        .collect()
}

fn cloud_filter(m: &ContinuousModel, pts: Vec<Vec<f64>>, y: &[f64], delta: f64) -> Vec<Vec<f64>> {
    pts.into_iter()
        .filter(|p| !m.is_faulty(p) && close(&m.output(p), y, delta))
        .collect()
}

/// Merges points sharing a cell and caps the cloud size deterministically.
fn thin(mut pts: Vec<Vec<f64>>, cell: f64, max_points: usize) -> Vec<Vec<f64>> {
    let key = |p: &Vec<f64>| {
        p.iter()
            .map(|v| (v / cell).floor() as i64)
            .collect::<Vec<i64>>()
    };
    pts.sort_by(|a, b| key(a).cmp(&key(b)));
    pts.dedup_by(|a, b| key(a) == key(b));
    if pts.len() > max_points {
        let stride = pts.len() as f64 / max_points as f64;
        pts = (0..max_points)
            .map(|i| pts[(i as f64 * stride) as usize].clone())
            .collect();
    }
    pts
}

pub fn diag_init(
    model: &SystemModel,
    delta: f64,
    horizon: usize,
    y0: &[f64],
    grid: &GridConfig,
) -> Result<DiagnoserState, DiagError> {
    check_arity(model, 0, y0)?;
    let m = match model {
        SystemModel::Finite(f) => {
            MSet::Exact(exact_filter(f, f.initial.iter().copied(), y0, delta))
        }
        SystemModel::Continuous(c) => {
            let pts = cloud_filter(c, c.x0.grid(grid.init_per_dim), y0, delta);
            MSet::Cloud(thin(pts, grid.cell, grid.max_points))
        }
    };
    let verdict = if m.is_empty() {
        DiagVerdict::FaultDetected {
            from: 0,
            to: 0,
            inconsistent_at_start: true,
        }
    } else {
        DiagVerdict::Running
    };
    Ok(DiagnoserState {
        k: 0,
        delta,
        horizon,
        m,
        verdict,
        grid: grid.clone(),
        rng: ChaCha8Rng::seed_from_u64(grid.seed),
    })
}

pub fn diag_step(model: &SystemModel, st: &mut DiagnoserState, y: &[f64]) -> Result<(), DiagError> {
    if st.verdict != DiagVerdict::Running {
        return Err(DiagError::Terminated(st.k));
    }
    let k = st.k + 1;
    check_arity(model, k, y)?;
    let next = match (model, &st.m) {
        (SystemModel::Finite(f), MSet::Exact(cur)) => {
            let img: BTreeSet<usize> = cur
                .iter()
                .flat_map(|&s| (0..f.num_inputs()).map(move |a| f.next(s, a)))
                .collect();
            MSet::Exact(exact_filter(f, img, y, st.delta))
        }
        (SystemModel::Continuous(c), MSet::Cloud(cur)) => {
            let inputs = c.u.grid(st.grid.input_grid);
            let mut img = Vec::with_capacity(cur.len() * inputs.len());
            for p in cur {
                for u in &inputs {
                    if let Ok(s) = c.successor(p, u) {
                        if c.x.contains(&s) {
                            img.push(s);
                        }
                    }
                }
            }
            let mut pts = thin(
                cloud_filter(c, img, y, st.delta),
                st.grid.cell,
                st.grid.max_points,
            );
            if !pts.is_empty() && pts.len() < st.grid.floor {
                // jitter inside a cell around surviving points
                let mut extra = Vec::new();
                let r = st.grid.cell * 0.5;
                while pts.len() + extra.len() < st.grid.floor * 2 && extra.len() < st.grid.floor * 4
                {
                    let base = &pts[extra.len() % pts.len()];
                    let q: Vec<f64> = base.iter().map(|v| v + st.rng.gen_range(-r..=r)).collect();
                    if c.x.contains(&q) {
                        extra.push(q);
                    }
                }
                pts.extend(cloud_filter(c, extra, y, st.delta));
                pts = thin(pts, st.grid.cell * 0.25, st.grid.max_points);
            }
            MSet::Cloud(pts)
        }
        _ => unreachable!("diagnoser state built for a different model kind"),
    };
    st.k = k;
    st.m = next;
    if st.m.is_empty() {
        st.verdict = DiagVerdict::FaultDetected {
            from: k.saturating_sub(st.horizon),
            to: k,
            inconsistent_at_start: false,
        };
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagTrace {
    /// |M(k)| per processed step
    pub sizes: Vec<usize>,
    /// exact sets as state vectors (finite models only)
    pub sets: Vec<Vec<Vec<f64>>>,
    pub verdict: DiagVerdict,
    /// `D` of the processed prefix: 1 once a fault is reported
    pub d: u8,
}

pub fn run_diagnoser(
    model: &SystemModel,
    delta: f64,
    horizon: usize,
    ys: &[Vec<f64>],
    grid: &GridConfig,
) -> Result<DiagTrace, DiagError> {
    let mut trace = DiagTrace {
        sizes: Vec::new(),
        sets: Vec::new(),
        verdict: DiagVerdict::Running,
        d: 0,
    };
    let Some((y0, rest)) = ys.split_first() else {
        return Ok(trace);
    };
    let mut st = diag_init(model, delta, horizon, y0, grid)?;
    let record = |st: &DiagnoserState, trace: &mut DiagTrace| {
        trace.sizes.push(st.m.len());
        if let (SystemModel::Finite(f), MSet::Exact(s)) = (model, &st.m) {
            trace
                .sets
                .push(s.iter().map(|&i| f.states[i].clone()).collect());
        }
    };
    record(&st, &mut trace);
    for y in rest {
        if st.verdict != DiagVerdict::Running {
            break;
        }
        diag_step(model, &mut st, y)?;
        record(&st, &mut trace);
    }
    trace.d = u8::from(st.verdict != DiagVerdict::Running);
    trace.verdict = st.verdict;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    /// first step whose state is faulty
    pub fault_step: Option<usize>,
}

/// Exact run from `x0` under `inputs`; observations add a perturbation of
/// norm at most `delta` drawn from `seed` (none when `seed` is `None`).
pub fn simulate(
    model: &SystemModel,
    x0: &[f64],
    inputs: &[Vec<f64>],
    delta: f64,
    seed: Option<u64>,
) -> Result<SimRun, DiagError> {
    let mut states = vec![x0.to_vec()];
    for (i, u) in inputs.iter().enumerate() {
        let s = model
            .successor(states.last().expect("nonempty"), u)
            .map_err(|source| DiagError::Simulation {
                step: i + 1,
                source,
            })?;
        if let SystemModel::Continuous(c) = model {
            if !c.x.contains(&s) {
                let source = ModelError::Domain(format!("state {s:?} outside X"));
                return Err(DiagError::Simulation {
                    step: i + 1,
                    source,
                });
            }
        }
        states.push(s);
    }
    let (outputs, faulty): (Vec<Vec<f64>>, Vec<bool>) = states
        .iter()
        .map(|x| match model {
            SystemModel::Finite(f) => {
                let i = f.state_index(x).expect("finite runs stay on states");
                (f.output[i].clone(), f.is_faulty_idx(i))
            }
            SystemModel::Continuous(c) => (c.output(x), c.is_faulty(x)),
        })
        .unzip();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let observations = outputs
        .iter()
        .map(|y| match rng.as_mut() {
            None => y.clone(),
            Some(r) => {
                // uniform direction by rejection, radius scaled into [0, delta]
                let dir: Vec<f64> = loop {
                    let v: Vec<f64> = y.iter().map(|_| r.gen_range(-1.0..=1.0)).collect();
                    let n2: f64 = v.iter().map(|a| a * a).sum();
                    if n2 > 1e-12 && n2 <= 1.0 {
                        let n = n2.sqrt();
                        break v.into_iter().map(|a| a / n).collect();
                    }
                };
                let rad = delta * r.gen::<f64>();
                y.iter().zip(dir).map(|(a, d)| a + rad * d).collect()
            }
        })
        .collect();
    Ok(SimRun {
        states,
        outputs,
        observations,
        fault_step: faulty.iter().position(|&f| f),
    })
}
