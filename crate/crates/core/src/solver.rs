//! Solvers behind one trait, looked up by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::basecase::{solve_basecase, BasecaseError, BasecaseParams, SweepMode};
use crate::decomposition::DEFAULT_STOP_RULE;
use crate::error::SolveError;
use crate::greedy::greedy_shortest_first;
use crate::instance::{Instance, Schedule};
use crate::oracle::{exact_solve, OracleError, OracleLimits};
use crate::ptas::{draw_offset, partition_for, solve_full, solve_tight, DpCaps, PtasParams, PtasReport};
use crate::{branching_factor, tightness_factor};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveParams {
    pub eps: f64,
    pub seed: u64,
    /// Random offsets tried by the full pipeline.
    pub offsets: usize,
    pub caps: DpCaps,
    /// Wall-clock budget of the exact solver; 0 means none.
    pub oracle_time_budget_ms: u64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self { eps: 0.5, seed: 0, offsets: 1, caps: DpCaps::default(), oracle_time_budget_ms: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveOutcome {
    pub schedule: Schedule,
    /// Some enumeration was cut short; the value may be below the solver's
    /// guarantee.
    pub truncated: bool,
    pub proven_optimal: bool,
    /// A work budget ran out before the solver finished.
    pub budget_exhausted: bool,
    pub report: Option<PtasReport>,
}

impl SolveOutcome {
    fn plain(schedule: Schedule) -> Self {
        Self { schedule, ..Self::default() }
    }
}

pub trait Solver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, inst: &Instance, params: &SolveParams) -> Result<SolveOutcome, SolveError>;
}

struct Greedy;

impl Solver for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn solve(&self, inst: &Instance, _: &SolveParams) -> Result<SolveOutcome, SolveError> {
        Ok(SolveOutcome::plain(greedy_shortest_first(inst)))
    }
}

struct Exact;

impl Solver for Exact {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn solve(&self, inst: &Instance, params: &SolveParams) -> Result<SolveOutcome, SolveError> {
        let limits = OracleLimits { time_budget_ms: params.oracle_time_budget_ms, ..OracleLimits::default() };
        let res = exact_solve(inst, limits).map_err(|e| match e {
            OracleError::TooManyJobs { .. } => SolveError::Precondition(e.to_string()),
        })?;
        Ok(SolveOutcome {
            schedule: res.schedule,
            truncated: !res.proven_optimal,
            proven_optimal: res.proven_optimal,
            budget_exhausted: !res.proven_optimal,
            report: None,
        })
    }
}

struct Basecase;

impl Solver for Basecase {
    fn name(&self) -> &'static str {
        "basecase"
    }

    fn solve(&self, inst: &Instance, params: &SolveParams) -> Result<SolveOutcome, SolveError> {
        let mut bp = BasecaseParams { eps: params.eps, ..BasecaseParams::default() };
        let first = solve_basecase(inst, &bp);
        let (out, truncated) = match first {
            Ok(out) => (out, false),
            Err(BasecaseError::StateBudget(_)) => {
                log::warn!("exact sweep over budget, retrying with rounded capacities");
                bp.mode = SweepMode::Rounded;
                let out = solve_basecase(inst, &bp).map_err(|e| SolveError::Budget(e.to_string()))?;
                (out, true)
            }
            Err(e @ BasecaseError::TooManyPoints { .. }) => {
                return Err(SolveError::Precondition(e.to_string()))
            }
        };
        Ok(SolveOutcome {
            schedule: out.schedule,
            truncated,
            proven_optimal: out.proven_optimal,
            budget_exhausted: false,
            report: None,
        })
    }
}

/// Runs the tree program on the tight jobs only; loose jobs are ignored.
struct TightDp;

impl Solver for TightDp {
    fn name(&self) -> &'static str {
        "tight-dp"
    }

    fn solve(&self, inst: &Instance, params: &SolveParams) -> Result<SolveOutcome, SolveError> {
        let lambda = tightness_factor(params.eps);
        let tight: Vec<_> = inst.jobs().iter().filter(|j| j.p * lambda >= j.span_len()).copied().collect();
        if tight.len() < inst.len() {
            log::info!("tight-dp ignores {} loose job(s)", inst.len() - tight.len());
        }
        let sub = inst.with_jobs(tight)?;
        let q = branching_factor(params.eps);
        let r0 = draw_offset(params.seed, 0, sub.horizon(), q);
        let part = partition_for(&sub, params.eps, r0, DEFAULT_STOP_RULE)?;
        let (schedule, stats) = solve_tight(&sub, &part, params.eps, params.caps)?;
        Ok(SolveOutcome {
            report: Some(PtasReport {
                value: schedule.value(),
                truncated: stats.truncated,
                r0,
                nodes_evaluated: stats.nodes_evaluated,
                leaf_calls: stats.leaf_calls,
                dp_value: schedule.value(),
                budget_exhausted: stats.budget_exhausted,
                ..PtasReport::default()
            }),
            schedule,
            truncated: stats.truncated,
            proven_optimal: false,
            budget_exhausted: stats.budget_exhausted,
        })
    }
}

struct FullPtas;

impl Solver for FullPtas {
    fn name(&self) -> &'static str {
        "full-ptas"
    }

    fn solve(&self, inst: &Instance, params: &SolveParams) -> Result<SolveOutcome, SolveError> {
        let pp = PtasParams {
            offsets: params.offsets.max(1),
            caps: params.caps,
            ..PtasParams::new(params.eps, params.seed)
        };
        let (schedule, report) = solve_full(inst, &pp)?;
        Ok(SolveOutcome {
            schedule,
            truncated: report.truncated,
            proven_optimal: false,
            budget_exhausted: report.budget_exhausted,
            report: Some(report),
        })
    }
}

/// Name-indexed solver table.
#[derive(Clone)]
pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Arc<dyn Solver>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self { solvers: BTreeMap::new() }
    }

    /// greedy, exact, basecase, tight-dp and full-ptas.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(Greedy));
        reg.register(Arc::new(Exact));
        reg.register(Arc::new(Basecase));
        reg.register(Arc::new(TightDp));
        reg.register(Arc::new(FullPtas));
        reg
    }

    /// Adds a solver, replacing any solver of the same name.
    pub fn register(&mut self, solver: Arc<dyn Solver>) {
        self.solvers.insert(solver.name(), solver);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Solver>> {
        self.solvers.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{validate_schedule, Job};

    fn sample() -> Instance {
        let jobs = vec![
            Job::new(0, 2, 0, 4),
            Job::new(1, 1, 1, 2),
            Job::new(2, 3, 2, 9),
            Job::new(3, 2, 5, 8),
        ];
        Instance::new(jobs, 1, vec![]).unwrap()
    }

    #[test]
    fn builtins_are_registered() {
        let reg = SolverRegistry::with_builtins();
        assert_eq!(reg.names(), vec!["basecase", "exact", "full-ptas", "greedy", "tight-dp"]);
        assert!(reg.get("nope").is_none());
    }

    #[test]
    fn every_builtin_is_feasible() {
        let reg = SolverRegistry::with_builtins();
        let inst = sample();
        let params = SolveParams::default();
        let opt = reg.get("exact").unwrap().solve(&inst, &params).unwrap();
        assert!(opt.proven_optimal);
        for name in reg.names() {
            let out = reg.get(name).unwrap().solve(&inst, &params).unwrap();
            assert!(validate_schedule(&inst, &out.schedule).feasible, "{name}");
            assert!(out.schedule.value() <= opt.schedule.value(), "{name}");
        }
    }

    #[test]
    fn register_replaces() {
        struct Nothing;
        impl Solver for Nothing {
            fn name(&self) -> &'static str {
                "greedy"
            }
            fn solve(&self, _: &Instance, _: &SolveParams) -> Result<SolveOutcome, SolveError> {
                Ok(SolveOutcome::default())
            }
        }
        let mut reg = SolverRegistry::with_builtins();
        reg.register(Arc::new(Nothing));
        let out = reg.get("greedy").unwrap().solve(&sample(), &SolveParams::default()).unwrap();
        assert_eq!(out.schedule.value(), 0);
    }
}
