use std::sync::Arc;

use throughput::harness::bench::{run_bench, BenchConfig, InstanceGroup};
use throughput::harness::generate::SpanDist;
use throughput::harness::lemmas::{validate_lemmas, LemmaConfig};
use throughput::{Instance, Schedule, SolveError, SolveOutcome, SolveParams, Solver, SolverRegistry};

/// Puts every job at time 0 on machine 0, feasible or not.
struct Overlapping;

impl Solver for Overlapping {
    fn name(&self) -> &'static str {
        "overlapping"
    }

    fn solve(&self, inst: &Instance, _: &SolveParams) -> Result<SolveOutcome, SolveError> {
        let schedule: Schedule = inst.jobs().iter().map(|j| (j.id, 0, 0)).collect();
        Ok(SolveOutcome { schedule, ..SolveOutcome::default() })
    }
}

fn config(solvers: &[&str]) -> BenchConfig {
    BenchConfig {
        seed: 11,
        eps: 0.5,
        solvers: solvers.iter().map(|s| s.to_string()).collect(),
        instances: vec![
            InstanceGroup { n: 6, m: 1, c: 2, horizon: 64, dist: SpanDist::TightHeavy, count: 2 },
            InstanceGroup { n: 8, m: 2, c: 3, horizon: 128, dist: SpanDist::LooseHeavy, count: 2 },
        ],
        oracle_time_budget_ms: 0,
        offsets: 1,
    }
}

fn csv_without_times(cfg: &BenchConfig, reg: &SolverRegistry) -> String {
    let mut res = run_bench(cfg, reg).unwrap();
    for row in &mut res.rows {
        row.wall_ms = 0;
    }
    let mut buf = Vec::new();
    res.write_csv(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn injected_fault_is_recorded() {
    let mut reg = SolverRegistry::with_builtins();
    reg.register(Arc::new(Overlapping));
    let res = run_bench(&config(&["greedy", "overlapping"]), &reg).unwrap();
    assert!(res.defects() > 0);
    for row in res.rows.iter().filter(|r| r.solver == "overlapping" && !r.feasible) {
        assert_eq!(row.value, 0);
    }
    assert!(res.rows.iter().filter(|r| r.solver == "greedy").all(|r| r.feasible));
}

#[test]
fn bench_is_stable_across_runs() {
    let reg = SolverRegistry::with_builtins();
    let cfg = config(&["full-ptas", "greedy", "exact", "basecase", "tight-dp"]);
    let a = csv_without_times(&cfg, &reg);
    let b = csv_without_times(&cfg, &reg);
    assert_eq!(a, b);
    let ids: Vec<(String, String)> = a
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().to_string())
        })
        .collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert_eq!(ids.len(), 4 * 5);
}

#[test]
fn lemma_report_serializes() {
    let cfg = LemmaConfig { instances: 2, offsets: 50, headtail_trials: 4, ..LemmaConfig::default() };
    let report = validate_lemmas(&cfg).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["q"], 16);
    assert_eq!(json["head_tail"]["vacuous"], true);
    assert_eq!(json["head_tail"]["losses"].as_array().unwrap().len(), report.head_tail.trials);
}
