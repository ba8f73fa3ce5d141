//! JSON system-spec documents.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::poly::{Polynomial, VarTable};
use super::sets::BoxSet;
use super::system::{ContinuousModel, FiniteModel, SystemModel};
use super::ModelError;

/// One polynomial term as written in documents: `{"coeff": c, "exps": {"x1": 2}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub coeff: f64,
    #[serde(default)]
    pub exps: BTreeMap<String, u32>,
}

pub fn poly_from_doc(terms: &[TermDoc], table: &VarTable) -> Result<Polynomial, ModelError> {
    let mut p = Polynomial::zero(table.len());
    for t in terms {
        let mut e = vec![0u32; table.len()];
        for (name, &k) in &t.exps {
            let i = table
                .index(name)
                .ok_or_else(|| ModelError::Schema(format!("unknown variable '{name}'")))?;
            e[i] += k;
        }
        p.add_term(e, t.coeff);
    }
    Ok(p)
}

pub fn poly_to_doc(p: &Polynomial, table: &VarTable) -> Vec<TermDoc> {
    p.terms()
        .map(|(e, c)| TermDoc {
            coeff: c,
            exps: e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| (table.name(i).to_string(), k))
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpecDoc {
    Continuous {
        n: usize,
        m: usize,
        #[serde(rename = "X")]
        x: Vec<[f64; 2]>,
        #[serde(rename = "X0")]
        x0: Vec<[f64; 2]>,
        #[serde(rename = "XF")]
        xf: Vec<[f64; 2]>,
        #[serde(rename = "U")]
        u: Vec<[f64; 2]>,
        f: Vec<Vec<TermDoc>>,
        h: Vec<Vec<TermDoc>>,
    },
    Finite {
        states: Vec<Vec<f64>>,
        initial: Vec<usize>,
        faulty: Vec<usize>,
        inputs: Vec<Vec<f64>>,
        trans: Vec<[usize; 3]>,
        output: Vec<Vec<f64>>,
    },
}

fn check_bounds(name: &str, b: &[[f64; 2]], dim: usize) -> Result<BoxSet, ModelError> {
    if b.len() != dim {
        return Err(ModelError::Schema(format!(
            "{name} has {} intervals, expected {dim}",
            b.len()
        )));
    }
    for iv in b {
        if !(iv[0] <= iv[1]) {
            return Err(ModelError::Schema(format!(
                "{name} has an empty interval {iv:?}"
            )));
        }
    }
    Ok(BoxSet::from_bounds(b))
}

impl SpecDoc {
    pub fn into_model(self) -> Result<SystemModel, ModelError> {
        match self {
            SpecDoc::Continuous {
                n,
                m,
                x,
                x0,
                xf,
                u,
                f,
                h,
            } => {
                let xb = check_bounds("X", &x, n)?;
                let x0b = check_bounds("X0", &x0, n)?;
                let xfb = check_bounds("XF", &xf, n)?;
                let ub = check_bounds("U", &u, m)?;
                let table = VarTable::state_input(n, m);
                let fp = f
                    .iter()
                    .map(|t| poly_from_doc(t, &table))
                    .collect::<Result<Vec<_>, _>>()?;
                let hp = h
                    .iter()
                    .map(|t| {
                        let p = poly_from_doc(t, &table)?;
                        if (n..n + m).any(|i| p.uses_var(i)) {
                            return Err(ModelError::Schema(
                                "h may only use state variables".into(),
                            ));
                        }
                        Ok(p.remap(n, &restrict_map(n, m)))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let model = ContinuousModel::new(xb, x0b, xfb, ub, fp, hp)?;
                Ok(SystemModel::Continuous(model))
            }
            SpecDoc::Finite {
                states,
                initial,
                faulty,
                inputs,
                trans,
                output,
            } => {
                let dim = states.first().map(|s| s.len()).unwrap_or(0);
                if states.iter().any(|s| s.len() != dim) {
                    return Err(ModelError::Schema("states have mixed dimensions".into()));
                }
                Ok(SystemModel::Finite(FiniteModel::new(
                    states, initial, faulty, inputs, &trans, output,
                )?))
            }
        }
    }

    pub fn from_model(model: &SystemModel) -> SpecDoc {
        match model {
            SystemModel::Continuous(c) => {
                let table = VarTable::state_input(c.n, c.m);
                let lift: Vec<usize> = (0..c.n).collect();
                SpecDoc::Continuous {
                    n: c.n,
                    m: c.m,
                    x: bounds(&c.x),
                    x0: bounds(&c.x0),
                    xf: bounds(&c.xf),
                    u: bounds(&c.u),
                    f: c.f.iter().map(|p| poly_to_doc(p, &table)).collect(),
                    h: c.h
                        .iter()
                        .map(|p| poly_to_doc(&p.remap(c.n + c.m, &lift), &table))
                        .collect(),
                }
            }
            SystemModel::Finite(f) => SpecDoc::Finite {
                states: f.states.clone(),
                initial: f.initial.clone(),
                faulty: f.faulty.clone(),
                inputs: f.inputs.clone(),
                trans: f.triples(),
                output: f.output.clone(),
            },
        }
    }
}

// identity on state variables; input variables are unused in h and collapse onto 0
fn restrict_map(n: usize, m: usize) -> Vec<usize> {
    (0..n).chain(std::iter::repeat(0).take(m)).collect()
}

fn bounds(b: &BoxSet) -> Vec<[f64; 2]> {
    b.ivs.iter().map(|iv| [iv.lo, iv.hi]).collect()
}

pub fn load_system_str(text: &str) -> Result<SystemModel, ModelError> {
    let doc: SpecDoc = serde_json::from_str(text)?;
    doc.into_model()
}

pub fn load_system(path: &Path) -> Result<SystemModel, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    load_system_str(&text)
}

pub fn system_to_json(model: &SystemModel) -> String {
    serde_json::to_string_pretty(&SpecDoc::from_model(model))
        .expect("spec documents always serialize")
}
