//! Solver comparison over generated instances.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::generate::{generate_instance, GenParams, SpanDist};
use super::rng::derive_seed;
use super::HarnessError;
use crate::instance::{validate_schedule, Time};
use crate::ptas::DpCaps;
use crate::solver::{SolveParams, SolverRegistry};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceGroup {
    pub n: usize,
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default = "one")]
    pub c: usize,
    #[serde(rename = "T")]
    pub horizon: Time,
    #[serde(default)]
    pub dist: SpanDist,
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

fn default_eps() -> f64 {
    0.5
}

fn default_budget() -> u64 {
    2000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub solvers: Vec<String>,
    pub instances: Vec<InstanceGroup>,
    #[serde(default = "default_budget")]
    pub oracle_time_budget_ms: u64,
    #[serde(default = "one")]
    pub offsets: usize,
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance_id: String,
    pub solver: String,
    pub value: usize,
    pub feasible: bool,
    pub wall_ms: u64,
    pub truncated: bool,
    pub seed: u64,
    pub eps: f64,
    #[serde(skip)]
    pub error: Option<String>,
    #[serde(skip)]
    pub budget_exhausted: bool,
}

#[derive(Clone, Debug, Default)]
pub struct BenchResult {
    /// Sorted by instance id, then solver name.
    pub rows: Vec<BenchRow>,
}

impl BenchResult {
    /// Rows whose schedule failed validation.
    pub fn defects(&self) -> usize {
        self.rows.iter().filter(|r| !r.feasible).count()
    }

    pub fn budget_hits(&self) -> usize {
        self.rows.iter().filter(|r| r.budget_exhausted).count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs every configured solver on every generated instance.
///
/// Schedules are validated before they are recorded. An infeasible one is
/// recorded with `feasible = false` and value 0. A solver error (an unmet
/// precondition or an exhausted budget) is logged and recorded as value 0
/// with `truncated = true`; the run continues.
pub fn run_bench(config: &BenchConfig, registry: &SolverRegistry) -> Result<BenchResult, HarnessError> {
    if config.solvers.is_empty() {
        return Err(HarnessError::Config("no solvers listed".into()));
    }
    let solvers = config
        .solvers
        .iter()
        .map(|name| {
            registry.get(name).ok_or_else(|| {
                HarnessError::Config(format!("unknown solver {name:?}; known: {}", registry.names().join(", ")))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut index = 0u64;
    for (g, group) in config.instances.iter().enumerate() {
        for k in 0..group.count {
            let seed = derive_seed(config.seed, "instance", index);
            index += 1;
            let gen = GenParams {
                n: group.n,
                m: group.m,
                c: group.c,
                horizon: group.horizon,
                seed,
                dist: group.dist,
            };
            let inst = generate_instance(&gen)?;
            let instance_id = format!("g{g:02}-{k:04}");
            for solver in &solvers {
                let params = SolveParams {
                    eps: config.eps,
                    seed: derive_seed(seed, "solver", 0),
                    offsets: config.offsets,
                    caps: DpCaps::default(),
                    oracle_time_budget_ms: config.oracle_time_budget_ms,
                };
                let clock = Instant::now();
                let result = solver.solve(&inst, &params);
                let wall_ms = clock.elapsed().as_millis() as u64;
                let mut row = BenchRow {
                    instance_id: instance_id.clone(),
                    solver: solver.name().to_string(),
                    value: 0,
                    feasible: true,
                    wall_ms,
                    truncated: false,
                    seed,
                    eps: config.eps,
                    error: None,
                    budget_exhausted: false,
                };
                match result {
                    Ok(out) => {
                        row.truncated = out.truncated;
                        row.budget_exhausted = out.budget_exhausted;
                        if validate_schedule(&inst, &out.schedule).feasible {
                            row.value = out.schedule.value();
                        } else {
                            log::error!("{instance_id}: {} returned an infeasible schedule", row.solver);
                            row.feasible = false;
                        }
                    }
                    Err(e) => {
                        log::warn!("{instance_id}: {} failed: {e}", row.solver);
                        row.truncated = true;
                        row.budget_exhausted = e.is_budget();
                        row.error = Some(e.to_string());
                    }
                }
                rows.push(row);
            }
        }
    }
    rows.sort_by(|a, b| (&a.instance_id, &a.solver).cmp(&(&b.instance_id, &b.solver)));
    Ok(BenchResult { rows })
}
