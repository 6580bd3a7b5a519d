//! Random instances.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::substream;
use super::HarnessError;
use crate::instance::{Instance, Job, Time};

/// How job windows are drawn. Tight windows are `p + U[0, p]` long, loose
/// ones `p * U[3, 8]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpanDist {
    TightHeavy,
    LooseHeavy,
    #[default]
    Mixed,
}

impl SpanDist {
    fn tight_share(self) -> f64 {
        match self {
            SpanDist::TightHeavy => 0.8,
            SpanDist::LooseHeavy => 0.2,
            SpanDist::Mixed => 0.5,
        }
    }
}

impl FromStr for SpanDist {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tight-heavy" => Ok(SpanDist::TightHeavy),
            "loose-heavy" => Ok(SpanDist::LooseHeavy),
            "mixed" => Ok(SpanDist::Mixed),
            _ => Err(format!("unknown span distribution {s:?} (tight-heavy, loose-heavy, mixed)")),
        }
    }
}

impl fmt::Display for SpanDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpanDist::TightHeavy => "tight-heavy",
            SpanDist::LooseHeavy => "loose-heavy",
            SpanDist::Mixed => "mixed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub m: usize,
    pub c: usize,
    #[serde(rename = "T")]
    pub horizon: Time,
    pub seed: u64,
    #[serde(default)]
    pub dist: SpanDist,
}

impl GenParams {
    pub fn new(n: usize, m: usize, c: usize, horizon: Time, seed: u64) -> Self {
        Self { n, m, c, horizon, seed, dist: SpanDist::Mixed }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.m < 1 {
            return Err(HarnessError::Config("m must be at least 1".into()));
        }
        if self.c < 1 {
            return Err(HarnessError::Config("c must be at least 1".into()));
        }
        if self.horizon < 4 {
            return Err(HarnessError::Config(format!("T must be at least 4, got {}", self.horizon)));
        }
        if self.c as Time > self.horizon / 4 {
            return Err(HarnessError::Config(format!(
                "c = {} distinct sizes do not fit in [1, T/4] = [1, {}]",
                self.c,
                self.horizon / 4
            )));
        }
        Ok(())
    }
}

const SIZE_TRIES: usize = 1000;

/// A random instance; identical parameters give identical instances.
///
/// Exactly `min(c, n)` distinct sizes appear. Sizes are log-uniform in
/// `[1, T/4]`; if `c` distinct values cannot be drawn in a reasonable
/// number of attempts, fewer are used and a warning is logged.
pub fn generate_instance(params: &GenParams) -> Result<Instance, HarnessError> {
    params.validate()?;
    let mut rng = substream(params.seed, "instance", 0);
    let top = (params.horizon / 4) as f64;

    let mut sizes: BTreeSet<Time> = BTreeSet::new();
    let mut tries = 0;
    while sizes.len() < params.c && tries < SIZE_TRIES {
        let x: f64 = rng.gen_range(0.0..=top.ln());
        sizes.insert((x.exp().round() as Time).clamp(1, params.horizon / 4));
        tries += 1;
    }
    if sizes.len() < params.c {
        log::warn!("only {} of {} distinct sizes could be drawn", sizes.len(), params.c);
    }
    let sizes: Vec<Time> = sizes.into_iter().collect();

    let mut jobs = Vec::with_capacity(params.n);
    for id in 0..params.n {
        // The first jobs cover every size once.
        let p = if id < sizes.len() { sizes[id] } else { sizes[rng.gen_range(0..sizes.len())] };
        let len = if rng.gen_bool(params.dist.tight_share()) {
            p + rng.gen_range(0..=p)
        } else {
            (p as f64 * rng.gen_range(3.0..=8.0)).round() as Time
        };
        let len = len.clamp(p, params.horizon);
        let r = rng.gen_range(0..=params.horizon - len);
        jobs.push(Job::new(id as u32, p, r, r + len));
    }
    Ok(Instance::new(jobs, params.m, vec![])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::instance_to_json;

    #[test]
    fn empty_instance() {
        let i = generate_instance(&GenParams::new(0, 1, 2, 100, 1)).unwrap();
        assert!(i.is_empty());
    }

    #[test]
    fn single_size() {
        let i = generate_instance(&GenParams::new(5, 1, 1, 100, 1)).unwrap();
        assert_eq!(i.distinct_sizes().len(), 1);
        assert_eq!(i.len(), 5);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let p = GenParams::new(20, 2, 3, 500, 42);
        let a = instance_to_json(&generate_instance(&p).unwrap());
        let b = instance_to_json(&generate_instance(&p).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn exact_size_count_and_windows() {
        for seed in 0..30 {
            for dist in [SpanDist::TightHeavy, SpanDist::LooseHeavy, SpanDist::Mixed] {
                let p = GenParams { dist, ..GenParams::new(12, 2, 3, 1000, seed) };
                let i = generate_instance(&p).unwrap();
                assert_eq!(i.distinct_sizes().len(), 3);
                for j in i.jobs() {
                    assert!(j.r + j.p <= j.d && j.d <= 1000);
                    assert!(j.p >= 1 && j.p <= 250);
                }
            }
        }
    }

    #[test]
    fn impossible_params() {
        assert!(generate_instance(&GenParams::new(3, 1, 5, 16, 0)).is_err());
        assert!(generate_instance(&GenParams::new(3, 0, 1, 16, 0)).is_err());
        assert!(generate_instance(&GenParams::new(3, 1, 1, 3, 0)).is_err());
    }

    #[test]
    fn dist_names_round_trip() {
        for d in [SpanDist::TightHeavy, SpanDist::LooseHeavy, SpanDist::Mixed] {
            assert_eq!(d.to_string().parse::<SpanDist>().unwrap(), d);
        }
        assert!("wide".parse::<SpanDist>().is_err());
    }
}
