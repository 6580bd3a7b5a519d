//! Non-preemptive throughput maximization on identical machines.
//!
//! Every job has a processing time, a release time and a deadline; the goal
//! is to run as many jobs as possible, each entirely inside its window, on
//! `m` machines that may carry pre-blocked intervals.
//!
//! The crate bundles reference solvers (an exact branch-and-bound and an
//! earliest-finish greedy), a randomized hierarchical decomposition with a
//! memoized dynamic program over it, a base-case solver for instances with
//! few distinct release times and deadlines, and a multiple-knapsack engine.
//! Solvers are exposed behind the [`solver::Solver`] trait and looked up by
//! name in a [`solver::SolverRegistry`].

pub mod basecase;
pub mod decomposition;
pub mod error;
pub mod greedy;
pub mod harness;
pub mod instance;
pub mod knapsack;
pub mod oracle;
pub mod ptas;
pub mod solver;

pub use error::SolveError;
pub use instance::{
    BlockedInterval, Instance, InstanceError, Job, JobId, Schedule, Time, ValidationReport,
};
pub use solver::{SolveOutcome, SolveParams, Solver, SolverRegistry};

/// `q = ceil(1/eps^2)`, the branching factor of the decomposition.
pub fn branching_factor(eps: f64) -> i64 {
    ((1.0 / (eps * eps)) - 1e-9).ceil().max(2.0) as i64
}

/// `lambda = ceil(1/eps)`, the tightness threshold.
pub fn tightness_factor(eps: f64) -> i64 {
    ((1.0 / eps) - 1e-9).ceil().max(2.0) as i64
}
