//! Approximate diagnosability of discrete-time control systems.
//!
//! A system is diagnosable when every faulty run separates from every
//! fault-free run (by more than the observation precision δ) within K steps
//! of the fault. The crate decides this exactly for finite systems, searches
//! for hybrid barrier certificates proving or refuting it for polynomial
//! systems, and runs an online diagnoser.

pub mod automaton;
pub mod cegis;
pub mod certificate;
pub mod cli;
pub mod diagnoser;
pub mod falsifier;
pub mod model;
pub mod product_oracle;
