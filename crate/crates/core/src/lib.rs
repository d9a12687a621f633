//! Numerical core for two-stage security-constrained optimal power flow.
//!
//! Everything here is pure computation over in-memory data and needs only
//! `alloc`: the grid model and bound sets, AC residual and penalty
//! evaluation, a Newton power flow with PV/PQ switching and distributed
//! slack, contingency ranking, a bounded-variable revised simplex, the
//! linearized (DC) preventive formulation with its Benders decomposition,
//! base-case recovery, the corrective per-contingency stage and the scoring
//! procedure. File formats, threads and wall clocks live in the `scopf`
//! companion crate and plug in through the traits in [`exec`].

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod acfun;
pub mod benders;
pub mod corrective;
pub mod evaluator;
pub mod exec;
pub mod lblc;
pub mod linalg;
pub mod lpsolve;
pub mod netmodel;
pub mod pfsolve;
pub mod ranking;
pub mod recovery;

mod num;

pub use acfun::{OperatingPoint, SlackBundle};
pub use netmodel::{
    BoundSet, Branch, Bus, Case, Contingency, ContingencyKind, Generator, ModelError, Network,
    NetworkParts,
    PenaltyBlock, PenaltySchedule, Violation,
};
