//! Monte Carlo checks of the decomposition's loss bounds.
//!
//! Three quantities are measured against an exact optimum:
//! the fraction of optimal jobs whose span crosses a coarse boundary
//! (bound `(lambda + 1) / q`), the fraction whose scheduled run crosses one
//! (bound `1 / q`), and the throughput lost by trimming heads and tails
//! (bound `min(1, 120 * eps * c)`, vacuous at small scale; the raw losses
//! are kept so regressions stay visible).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::generate::{generate_instance, GenParams, SpanDist};
use super::rng::derive_seed;
use super::HarnessError;
use crate::decomposition::{
    build_partition, classify_jobs, cut_heads_tails, find_position_crossing, find_span_crossing,
    HierarchicalPartition,
};
use crate::instance::{validate_schedule, Instance, Time};
use crate::oracle::{exact_solve, OracleLimits};
use crate::ptas::draw_offset;
use crate::{branching_factor, tightness_factor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaConfig {
    pub seed: u64,
    /// `0.25` gives `q = 16`, `lambda = 4`.
    pub eps: f64,
    #[serde(rename = "T")]
    pub horizon: Time,
    pub instances: usize,
    pub n: usize,
    pub m: usize,
    pub c: usize,
    pub dist: SpanDist,
    pub offsets: usize,
    pub headtail_trials: usize,
    pub headtail_horizon: Time,
    pub oracle_time_budget_ms: u64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            eps: 0.25,
            horizon: 4096,
            instances: 20,
            n: 8,
            m: 1,
            c: 3,
            dist: SpanDist::Mixed,
            offsets: 2000,
            headtail_trials: 200,
            headtail_horizon: 256,
            oracle_time_budget_ms: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaStat {
    pub mean: f64,
    pub bound: f64,
    pub se: f64,
    pub pass: bool,
    pub trials: usize,
    /// Instances dropped because the oracle gave up or the optimum is empty.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeadTailStat {
    pub mean_loss: f64,
    pub median_loss: f64,
    pub bound: f64,
    pub vacuous: bool,
    pub pass: bool,
    /// Every optimal trimmed schedule was feasible for the untrimmed
    /// instance.
    pub feasible_all: bool,
    pub trials: usize,
    pub skipped: usize,
    pub losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaReport {
    pub q: i64,
    pub lambda: i64,
    pub eps: f64,
    pub span_crossing: LemmaStat,
    pub position_crossing: LemmaStat,
    pub head_tail: HeadTailStat,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn stat(xs: &[f64], bound: f64, skipped: usize) -> LemmaStat {
    let (mean, se) = mean_se(xs);
    LemmaStat { mean, bound, se, pass: mean <= bound + 3.0 * se, trials: xs.len(), skipped }
}

fn geometry(horizon: Time, q: i64, r0: Time) -> HierarchicalPartition {
    build_partition(horizon, q, r0, usize::MAX, &BTreeSet::new()).expect("offset drawn in range")
}

fn limits(config: &LemmaConfig) -> OracleLimits {
    OracleLimits { time_budget_ms: config.oracle_time_budget_ms, ..OracleLimits::default() }
}

pub fn validate_lemmas(config: &LemmaConfig) -> Result<LemmaReport, HarnessError> {
    if !(config.eps > 0.0 && config.eps <= 1.0) {
        return Err(HarnessError::Config(format!("eps must lie in (0, 1], got {}", config.eps)));
    }
    let q = branching_factor(config.eps);
    let lambda = tightness_factor(config.eps);

    let mut span_fracs = Vec::new();
    let mut pos_fracs = Vec::new();
    let mut skipped = 0;
    for i in 0..config.instances {
        let seed = derive_seed(config.seed, "lemma-instance", i as u64);
        let gen = GenParams { dist: config.dist, ..GenParams::new(config.n, config.m, config.c, config.horizon, seed) };
        let inst = generate_instance(&gen)?;
        let opt = exact_solve(&inst, limits(config)).map_err(|e| HarnessError::Config(e.to_string()))?;
        if !opt.proven_optimal || opt.value == 0 {
            skipped += 1;
            continue;
        }
        let chosen = opt.schedule.job_ids();
        let total = opt.value as f64;
        for o in 0..config.offsets {
            let r0 = draw_offset(seed, o as u64, inst.horizon(), q);
            let part = geometry(inst.horizon(), q, r0);
            let classes = classify_jobs(&inst, &part, lambda);
            let span = find_span_crossing(&inst, &part, &classes);
            span_fracs.push(span.intersection(&chosen).count() as f64 / total);
            let pos = find_position_crossing(&inst, &opt.schedule, &part);
            pos_fracs.push(pos.len() as f64 / total);
        }
    }
    let span_crossing = stat(&span_fracs, (lambda + 1) as f64 / q as f64, skipped);
    let position_crossing = stat(&pos_fracs, 1.0 / q as f64, skipped);
    let head_tail = head_tail(config, q, lambda)?;
    Ok(LemmaReport { q, lambda, eps: config.eps, span_crossing, position_crossing, head_tail })
}

/// One trial: the optimum of the uncrossed instance `I'` against the
/// optimum after trimming heads and tails.
pub struct HeadTailTrial {
    pub opt_before: usize,
    pub opt_after: usize,
    pub feasible_before: bool,
}

/// Returns `None` when the oracle gives up on either instance.
pub fn head_tail_trial(inst: &Instance, q: i64, lambda: i64, r0: Time, limits: OracleLimits) -> Option<HeadTailTrial> {
    let part = geometry(inst.horizon(), q, r0);
    let classes = classify_jobs(inst, &part, lambda);
    let reduced = inst.without(&find_span_crossing(inst, &part, &classes));
    let trimmed = cut_heads_tails(&reduced, &part, &classes).instance;
    let before = exact_solve(&reduced, limits).ok()?;
    let after = exact_solve(&trimmed, limits).ok()?;
    if !before.proven_optimal || !after.proven_optimal {
        return None;
    }
    Some(HeadTailTrial {
        opt_before: before.value,
        opt_after: after.value,
        feasible_before: validate_schedule(&reduced, &after.schedule).feasible,
    })
}

fn head_tail(config: &LemmaConfig, q: i64, lambda: i64) -> Result<HeadTailStat, HarnessError> {
    let raw = 120.0 * config.eps * config.c as f64;
    let bound = raw.min(1.0);
    let mut losses = Vec::new();
    let mut skipped = 0;
    let mut pass = true;
    let mut feasible_all = true;
    for t in 0..config.headtail_trials {
        let seed = derive_seed(config.seed, "headtail", t as u64);
        let gen = GenParams {
            dist: config.dist,
            ..GenParams::new(config.n, config.m, config.c, config.headtail_horizon, seed)
        };
        let inst = generate_instance(&gen)?;
        let r0 = draw_offset(seed, 0, inst.horizon(), q);
        let Some(trial) = head_tail_trial(&inst, q, lambda, r0, limits(config)) else {
            skipped += 1;
            continue;
        };
        feasible_all &= trial.feasible_before;
        pass &= trial.opt_after as f64 >= (1.0 - bound) * trial.opt_before as f64;
        let loss = if trial.opt_before == 0 {
            0.0
        } else {
            (trial.opt_before - trial.opt_after.min(trial.opt_before)) as f64 / trial.opt_before as f64
        };
        losses.push(loss);
    }
    let (mean_loss, _) = mean_se(&losses);
    let mut sorted = losses.clone();
    sorted.sort_by(f64::total_cmp);
    let median_loss = match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    };
    Ok(HeadTailStat {
        mean_loss,
        median_loss,
        bound,
        vacuous: raw >= 1.0,
        pass: pass && feasible_all,
        feasible_all,
        trials: losses.len(),
        skipped,
        losses,
    })
}
