//! The hierarchical approximation scheme.
//!
//! [`solve_full`] draws a random offset, drops jobs whose span crosses a
//! coarse boundary, trims the heads and tails of loose jobs, builds the
//! decomposition tree and runs the dynamic program of [`dp`] on it. The best
//! result over all offsets is topped up greedily and compared with the
//! greedy baseline. [`solve_tight`] runs the program alone on an instance of
//! tight jobs.

mod dp;
pub mod key;

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use crate::decomposition::{
    build_partition, classify_jobs, cut_heads_tails, find_span_crossing, HierarchicalPartition,
    DEFAULT_STOP_RULE,
};
use crate::error::SolveError;
use crate::greedy::{best_schedule, fill_gaps, greedy_shortest_first};
use crate::harness::rng::substream;
use crate::instance::{start_candidates, Instance, Schedule, Time, DEFAULT_SLACK_CAP};
use crate::{branching_factor, tightness_factor};

pub use dp::DpStats;
use dp::{DpConfig, Engine};

/// Work limits of the dynamic program. `None` disables a limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DpCaps {
    /// Most jobs one node may place across all its children.
    pub g_max: Option<usize>,
    /// Most placement sets or push splits tried per child.
    pub composition_budget: Option<usize>,
    /// Most node states evaluated; further states count as empty.
    pub node_budget: Option<usize>,
    /// Most memo entries; exceeding it is an error.
    pub table_cap: Option<usize>,
    /// Most sweep options evaluated overall; afterwards only the empty
    /// option is tried and new states count as empty.
    pub work_budget: Option<usize>,
}

impl Default for DpCaps {
    fn default() -> Self {
        Self {
            g_max: Some(4),
            composition_budget: Some(4096),
            node_budget: Some(100_000),
            table_cap: Some(1_000_000),
            work_budget: Some(200_000),
        }
    }
}

impl DpCaps {
    pub fn disabled() -> Self {
        Self { g_max: None, composition_budget: None, node_budget: None, table_cap: None, work_budget: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PtasParams {
    pub eps: f64,
    pub seed: u64,
    /// Number of random offsets tried.
    pub offsets: usize,
    pub stop_rule: usize,
    pub caps: DpCaps,
    pub slack_cap: usize,
    /// Use this offset instead of drawing one.
    pub fixed_r0: Option<Time>,
    /// Memo budget handed to each leaf solve.
    pub leaf_budget: usize,
}

impl PtasParams {
    pub fn new(eps: f64, seed: u64) -> Self {
        Self {
            eps,
            seed,
            offsets: 1,
            stop_rule: DEFAULT_STOP_RULE,
            caps: DpCaps::default(),
            slack_cap: DEFAULT_SLACK_CAP,
            fixed_r0: None,
            leaf_budget: 200_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PtasReport {
    pub value: usize,
    pub truncated: bool,
    pub r0: Time,
    pub nodes_evaluated: usize,
    pub leaf_calls: usize,
    #[serde(skip)]
    pub dp_value: usize,
    #[serde(skip)]
    pub budget_exhausted: bool,
    #[serde(skip)]
    pub crossing_removed: usize,
    #[serde(skip)]
    pub cut_dropped: usize,
}

fn check_eps(eps: f64) -> Result<(), SolveError> {
    if eps.is_finite() && eps > 0.0 && eps <= 0.5 {
        Ok(())
    } else {
        Err(SolveError::Parameter(format!("eps must lie in (0, 1/2], got {eps}")))
    }
}

/// Offset number `index` for seed `seed`, uniform in `[0, T/q]`.
pub fn draw_offset(seed: u64, index: u64, horizon: Time, q: i64) -> Time {
    let mut rng = substream(seed, "offset", index);
    rng.gen_range(0..=horizon / q)
}

/// Release times, deadlines and block endpoints: the points that decide
/// where the tree is refined.
pub fn refinement_points(inst: &Instance) -> BTreeSet<Time> {
    let mut pts = inst.release_times();
    pts.extend(inst.deadlines());
    for b in inst.blocked() {
        pts.insert(b.start);
        pts.insert(b.end);
    }
    pts
}

/// Runs the dynamic program on `inst` over `part`, placing every job at
/// the tree node that owns it. Every job must be tight: `p * lambda` at
/// least its span length.
pub fn solve_tight(
    inst: &Instance,
    part: &HierarchicalPartition,
    eps: f64,
    caps: DpCaps,
) -> Result<(Schedule, DpStats), SolveError> {
    check_eps(eps)?;
    let lambda = tightness_factor(eps);
    if let Some(j) = inst.jobs().iter().find(|j| j.p * lambda < j.span_len()) {
        return Err(SolveError::Precondition(format!(
            "job {} is not tight: {} * {lambda} < {}",
            j.id,
            j.p,
            j.span_len()
        )));
    }
    let cands = start_candidates(inst, DEFAULT_SLACK_CAP);
    if cands.overflow {
        return Err(SolveError::Budget(format!(
            "more than {DEFAULT_SLACK_CAP} candidate start times"
        )));
    }
    let cfg = DpConfig { lambda, eps, push_down: false, caps, basecase_budget: 200_000 };
    let mut engine = Engine::new(inst, part, cfg, cands.times);
    let (_, sched) = engine.solve()?;
    Ok((sched, engine.stats))
}

/// The full pipeline; see the module docs.
pub fn solve_full(inst: &Instance, params: &PtasParams) -> Result<(Schedule, PtasReport), SolveError> {
    check_eps(params.eps)?;
    if params.offsets == 0 && params.fixed_r0.is_none() {
        return Err(SolveError::Parameter("at least one offset is needed".into()));
    }
    let q = branching_factor(params.eps);
    let lambda = tightness_factor(params.eps);
    let horizon = inst.horizon();
    let mut report = PtasReport::default();
    let mut best: Option<(Schedule, Time, usize)> = None;
    let rounds = if params.fixed_r0.is_some() { 1 } else { params.offsets };

    for index in 0..rounds {
        let r0 = params
            .fixed_r0
            .unwrap_or_else(|| draw_offset(params.seed, index as u64, horizon, q));
        let geometry = build_partition(horizon, q, r0, usize::MAX, &BTreeSet::new())
            .map_err(|e| SolveError::Parameter(e.to_string()))?;
        let classes = classify_jobs(inst, &geometry, lambda);
        let crossing = find_span_crossing(inst, &geometry, &classes);
        let reduced = inst.without(&crossing);
        let cut = cut_heads_tails(&reduced, &geometry, &classes);
        report.crossing_removed = report.crossing_removed.max(crossing.len());
        report.cut_dropped = report.cut_dropped.max(cut.dropped.len());
        let trimmed = cut.instance;

        let part = build_partition(horizon, q, r0, params.stop_rule, &refinement_points(&trimmed))
            .map_err(|e| SolveError::Parameter(e.to_string()))?;
        let cands = start_candidates(&trimmed, params.slack_cap);
        let (dp_sched, dp_value) = if cands.overflow {
            log::warn!("offset {r0}: candidate start times overflow, skipping the DP");
            report.truncated = true;
            (Schedule::new(), 0)
        } else {
            let cfg = DpConfig {
                lambda,
                eps: params.eps,
                push_down: true,
                caps: params.caps,
                basecase_budget: params.leaf_budget,
            };
            let mut engine = Engine::new(&trimmed, &part, cfg, cands.times);
            let (value, sched) = engine.solve()?;
            report.nodes_evaluated += engine.stats.nodes_evaluated;
            report.leaf_calls += engine.stats.leaf_calls;
            report.truncated |= engine.stats.truncated;
            report.budget_exhausted |= engine.stats.budget_exhausted;
            (sched, value)
        };
        log::debug!("offset {r0}: DP value {dp_value}");
        let filled = fill_gaps(inst, &dp_sched);
        if best.as_ref().is_none_or(|(s, _, _)| filled.value() > s.value()) {
            best = Some((filled, r0, dp_value));
        }
    }

    let (sched, r0, dp_value) = best.expect("at least one round ran");
    let out = best_schedule(inst, [sched, greedy_shortest_first(inst)]);
    report.value = out.value();
    report.r0 = r0;
    report.dp_value = dp_value;
    Ok((out, report))
}

/// Partition used by [`solve_full`] for offset `r0`, exposed for tests and
/// diagnostics.
pub fn partition_for(inst: &Instance, eps: f64, r0: Time, stop_rule: usize) -> Result<HierarchicalPartition, SolveError> {
    build_partition(inst.horizon(), branching_factor(eps), r0, stop_rule, &refinement_points(inst))
        .map_err(|e| SolveError::Parameter(e.to_string()))
}
