use super::poly::Polynomial;
use super::sets::BoxSet;
use super::ModelError;

/// Box-constrained system with polynomial update `f(x,u)` and output `h(x)`.
///
/// `f` ranges over `n + m` variables (state first, then input); `h` over `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel {
    pub n: usize,
    pub m: usize,
    pub x: BoxSet,
    pub x0: BoxSet,
    pub xf: BoxSet,
    pub u: BoxSet,
    pub f: Vec<Polynomial>,
    pub h: Vec<Polynomial>,
}

impl ContinuousModel {
    pub fn new(
        x: BoxSet,
        x0: BoxSet,
        xf: BoxSet,
        u: BoxSet,
        f: Vec<Polynomial>,
        h: Vec<Polynomial>,
    ) -> Result<Self, ModelError> {
        let n = x.dim();
        let m = u.dim();
        if x0.dim() != n || xf.dim() != n {
            return Err(ModelError::Schema(
                "X0 and XF must have the dimension of X".into(),
            ));
        }
        if f.len() != n {
            return Err(ModelError::Schema(format!(
                "f has {} components, expected {n}",
                f.len()
            )));
        }
        if h.is_empty() {
            return Err(ModelError::Schema("h needs at least one component".into()));
        }
        for p in &f {
            if p.nvars() != n + m {
                return Err(ModelError::Schema(
                    "f must range over state and input variables".into(),
                ));
            }
        }
        for p in &h {
            if p.nvars() != n {
                return Err(ModelError::Schema(
                    "h must range over state variables only".into(),
                ));
            }
        }
        if !x.contains_box(&x0) {
            return Err(ModelError::InitialNotContained);
        }
        if !x.contains_box(&xf) {
            return Err(ModelError::FaultyNotContained);
        }
        Ok(ContinuousModel {
            n,
            m,
            x,
            x0,
            xf,
            u,
            f,
            h,
        })
    }

    pub fn q_out(&self) -> usize {
        self.h.len()
    }

    /// `f(x,u)` without domain checks.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.n + self.m);
        z.extend_from_slice(x);
        z.extend_from_slice(u);
        self.f.iter().map(|p| p.eval_unchecked(&z)).collect()
    }

    pub fn successor(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, ModelError> {
        if !self.x.contains(x) {
            return Err(ModelError::Domain(format!("state {x:?} outside X")));
        }
        if !self.u.contains(u) {
            return Err(ModelError::Domain(format!("input {u:?} outside U")));
        }
        Ok(self.step(x, u))
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        self.h.iter().map(|p| p.eval_unchecked(x)).collect()
    }

    pub fn is_faulty(&self, x: &[f64]) -> bool {
        self.xf.contains(x)
    }
}

/// Explicit finite system. States and inputs are real vectors so the same
/// labeling code serves both flavors.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteModel {
    pub states: Vec<Vec<f64>>,
    pub initial: Vec<usize>,
    pub faulty: Vec<usize>,
    pub inputs: Vec<Vec<f64>>,
    /// `trans[s][i]` is the successor of state `s` under input `i`.
    pub trans: Vec<Vec<usize>>,
    pub output: Vec<Vec<f64>>,
    fault_flag: Vec<bool>,
}

impl FiniteModel {
    /// Builds from a triple list `(state, input, next)`, which must be total and deterministic.
    pub fn new(
        states: Vec<Vec<f64>>,
        initial: Vec<usize>,
        faulty: Vec<usize>,
        inputs: Vec<Vec<f64>>,
        triples: &[[usize; 3]],
        output: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let ns = states.len();
        let ni = inputs.len();
        if ns == 0 || ni == 0 {
            return Err(ModelError::Schema(
                "finite model needs at least one state and one input".into(),
            ));
        }
        if output.len() != ns {
            return Err(ModelError::Schema(format!(
                "output has {} rows, expected {ns}",
                output.len()
            )));
        }
        if initial.iter().any(|&s| s >= ns) {
            return Err(ModelError::InitialNotContained);
        }
        if faulty.iter().any(|&s| s >= ns) {
            return Err(ModelError::FaultyNotContained);
        }
        // states and inputs are addressed by value, so points must be distinct
        for (what, pts) in [("state", &states), ("input", &inputs)] {
            for i in 0..pts.len() {
                if let Some(j) = (0..i).find(|&j| same_point(&pts[j], &pts[i])) {
                    return Err(ModelError::Schema(format!(
                        "{what}s {j} and {i} are the same point"
                    )));
                }
            }
        }
        let mut trans = vec![vec![usize::MAX; ni]; ns];
        for t in triples {
            let [s, i, nx] = *t;
            if s >= ns || i >= ni || nx >= ns {
                return Err(ModelError::Schema(format!(
                    "transition {t:?} refers to an unknown index"
                )));
            }
            if trans[s][i] != usize::MAX && trans[s][i] != nx {
                return Err(ModelError::Schema(format!(
                    "transition ({s},{i}) defined twice"
                )));
            }
            trans[s][i] = nx;
        }
        for (s, row) in trans.iter().enumerate() {
            if let Some(i) = row.iter().position(|&v| v == usize::MAX) {
                return Err(ModelError::NonTotal { state: s, input: i });
            }
        }
        let mut fault_flag = vec![false; ns];
        for &s in &faulty {
            fault_flag[s] = true;
        }
        Ok(FiniteModel {
            states,
            initial,
            faulty,
            inputs,
            trans,
            output,
            fault_flag,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn next(&self, s: usize, i: usize) -> usize {
        self.trans[s][i]
    }

    pub fn is_faulty_idx(&self, s: usize) -> bool {
        self.fault_flag[s]
    }

    pub fn state_index(&self, x: &[f64]) -> Option<usize> {
        self.states.iter().position(|s| same_point(s, x))
    }

    pub fn input_index(&self, u: &[f64]) -> Option<usize> {
        self.inputs.iter().position(|s| same_point(s, u))
    }

    pub fn successor(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, ModelError> {
        let s = self
            .state_index(x)
            .ok_or_else(|| ModelError::Domain(format!("{x:?} is not a state")))?;
        let i = self
            .input_index(u)
            .ok_or_else(|| ModelError::Domain(format!("{u:?} is not an input")))?;
        Ok(self.states[self.next(s, i)].clone())
    }

    pub fn triples(&self) -> Vec<[usize; 3]> {
        let mut v = Vec::new();
        for (s, row) in self.trans.iter().enumerate() {
            for (i, &nx) in row.iter().enumerate() {
                v.push([s, i, nx]);
            }
        }
        v
    }
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(p, q)| (p - q).abs() <= 1e-12 * (1.0 + p.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemModel {
    Continuous(ContinuousModel),
    Finite(FiniteModel),
}

impl SystemModel {
    pub fn successor(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, ModelError> {
        match self {
            SystemModel::Continuous(c) => c.successor(x, u),
            SystemModel::Finite(f) => f.successor(x, u),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            SystemModel::Continuous(c) => c.n,
            SystemModel::Finite(f) => f.states[0].len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SystemModel::Continuous(_) => "continuous",
            SystemModel::Finite(_) => "finite",
        }
    }

    pub fn as_finite(&self) -> Option<&FiniteModel> {
        match self {
            SystemModel::Finite(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_continuous(&self) -> Option<&ContinuousModel> {
        match self {
            SystemModel::Continuous(c) => Some(c),
            _ => None,
        }
    }
}
