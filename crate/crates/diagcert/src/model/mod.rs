//! Polynomials, intervals, semi-algebraic sets and the two system flavors.

pub mod catalog;
pub mod interval;
pub mod poly;
pub mod sets;
pub mod spec;
pub mod system;

pub use interval::Interval;
pub use poly::{monomials, Exps, Polynomial, VarTable};
pub use sets::{BoxClass, BoxSet, Rel, SemiAlgebraicSet};
pub use spec::{load_system, load_system_str, system_to_json, SpecDoc, TermDoc};
pub use system::{ContinuousModel, FiniteModel, SystemModel};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("initial set not contained in state set")]
    InitialNotContained,
    #[error("faulty set not contained in state set")]
    FaultyNotContained,
    #[error("transition map not total: state {state} has no successor under input {input}")]
    NonTotal { state: usize, input: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(String),
}

/// Interval enclosure of a polynomial over a box.
pub fn interval_eval(p: &Polynomial, b: &BoxSet) -> Interval {
    p.interval_eval(&b.ivs)
}
