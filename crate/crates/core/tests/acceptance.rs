//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use throughput::basecase::{solve_basecase, sweep, BasecaseParams, SweepMode};
use throughput::greedy::greedy_shortest_first;
use throughput::harness::generate::{generate_instance, GenParams, SpanDist};
use throughput::harness::lemmas::{validate_lemmas, LemmaConfig};
use throughput::instance::{schedule_to_json, validate_schedule};
use throughput::knapsack::{mk_exact, mk_rounded, MkProblem};
use throughput::oracle::{exact_solve, OracleLimits};
use throughput::ptas::{partition_for, solve_full, solve_tight, DpCaps, PtasParams};
use throughput::{Instance, Job, SolveParams, SolverRegistry, Time};

use common::*;

/// Lower bound on the average `solve_full / opt` ratio of criterion 9.
const FULL_PIPELINE_AVERAGE_FLOOR: f64 = 0.8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn oracle_agreement() -> Outcome {
    let clock = Instant::now();
    let mut rng = rng(101);
    let mut mismatches = 0;
    let mut infeasible = 0;
    for _ in 0..500 {
        let n = rng.gen_range(0..=8);
        let m = rng.gen_range(1..=2);
        let c = rng.gen_range(1..=3);
        let blocks = rng.gen_range(0..=1);
        let inst = random_instance(&mut rng, n, m, c, 24, 6, blocks);
        let res = exact_solve(&inst, OracleLimits::default()).expect("n <= 8");
        if !validate_schedule(&inst, &res.schedule).feasible {
            infeasible += 1;
        }
        if res.value != brute_force_opt(&inst) {
            mismatches += 1;
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && infeasible == 0 && secs < 60.0,
        format!("500 instances, {mismatches} mismatches, {infeasible} infeasible, {secs:.1}s"),
    )
}

fn greedy_guarantee() -> Outcome {
    let mut rng = rng(202);
    let mut below = 0;
    let mut infeasible = 0;
    let mut checked = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let c = rng.gen_range(1..=3);
        let blocks = rng.gen_range(0..=1);
        let inst = random_instance(&mut rng, n, 1, c, 30, 8, blocks);
        let opt = exact_solve(&inst, OracleLimits::default()).expect("n <= 8");
        assert!(opt.proven_optimal);
        let g = greedy_shortest_first(&inst);
        if !validate_schedule(&inst, &g).feasible {
            infeasible += 1;
        }
        if g.value() < opt.value.div_ceil(2) {
            below += 1;
        }
        checked += 1;
    }
    let tight = Instance::new(vec![Job::new(0, 2, 0, 4), Job::new(1, 1, 1, 2)], 1, vec![]).unwrap();
    let g = greedy_shortest_first(&tight).value();
    let o = exact_solve(&tight, OracleLimits::default()).unwrap().value;
    outcome(
        below == 0 && infeasible == 0 && g == 1 && o == 2,
        format!("{checked} instances, {below} below ceil(opt/2), {infeasible} infeasible; tight example greedy={g} opt={o}"),
    )
}

fn lemma_report() -> throughput::harness::lemmas::LemmaReport {
    let cfg = LemmaConfig { seed: 2024, ..LemmaConfig::default() };
    assert_eq!((cfg.instances, cfg.offsets, cfg.headtail_trials), (20, 2000, 200));
    validate_lemmas(&cfg).expect("lemma run")
}

fn span_crossing(r: &throughput::harness::lemmas::LemmaReport) -> Outcome {
    let s = &r.span_crossing;
    outcome(
        s.pass && r.q == 16 && r.lambda == 4 && s.trials >= 2000,
        format!(
            "mean {:.4} vs bound {:.4} + 3*{:.4} over {} trials ({} instances skipped)",
            s.mean, s.bound, s.se, s.trials, s.skipped
        ),
    )
}

fn position_crossing(r: &throughput::harness::lemmas::LemmaReport) -> Outcome {
    let s = &r.position_crossing;
    outcome(
        s.pass && s.trials >= 2000,
        format!(
            "mean {:.4} vs bound {:.4} + 3*{:.4} over {} trials",
            s.mean, s.bound, s.se, s.trials
        ),
    )
}

fn head_tail(r: &throughput::harness::lemmas::LemmaReport) -> Outcome {
    let h = &r.head_tail;
    outcome(
        h.pass && h.feasible_all && h.trials + h.skipped == 200,
        format!(
            "{} trials ({} skipped), all feasible on I': {}, bound {} (vacuous: {}), mean loss {:.3}, median loss {:.3} (informational, expected <= 0.5)",
            h.trials, h.skipped, h.feasible_all, h.bound, h.vacuous, h.mean_loss, h.median_loss
        ),
    )
}

fn knapsack() -> Outcome {
    let mut rng = rng(606);
    let mut exact_bad = 0;
    let mut rounded_bad = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(0..=8);
        let k = rng.gen_range(1..=3);
        let sizes: Vec<Time> = (0..n).map(|_| rng.gen_range(1..=12)).collect();
        let caps: Vec<Time> = (0..k).map(|_| rng.gen_range(0..=30)).collect();
        let prob = MkProblem::new(sizes.clone(), caps.clone());
        let exact = mk_exact(&prob).unwrap();
        if exact.count != knapsack_brute(&sizes, &caps) || !exact.is_valid_for(&prob) {
            exact_bad += 1;
        }
        for eps in [0.1, 0.25] {
            let r = mk_rounded(&prob, eps).unwrap();
            if !r.is_valid_for(&prob) || (r.count as f64) < (1.0 - 2.0 * eps) * exact.count as f64 {
                rounded_bad += 1;
            }
        }
    }
    outcome(
        exact_bad == 0 && rounded_bad == 0,
        format!("1000 cases, exact mismatches {exact_bad}, rounded below (1-2eps) {rounded_bad}"),
    )
}

fn base_case() -> Outcome {
    let mut rng = rng(707);
    let mut sweep_bad = 0;
    let mut equal_bad = 0;
    let mut lower_bad = 0;
    let mut rounded_bad = 0;
    let mut straddle_free_optima = 0;
    for _ in 0..300 {
        let n = rng.gen_range(1..=10);
        let m = rng.gen_range(1..=2);
        let blocks = rng.gen_range(0..=2) / m;
        let inst = few_points_instance(&mut rng, n, m, 3, blocks, 24);
        let opt = brute_force_opt(&inst);
        let barriers = straddle_points(&inst);
        let straddles: usize = barriers.iter().map(Vec::len).sum();
        let exact_params = BasecaseParams::default();
        let out = solve_basecase(&inst, &exact_params).expect("few points");
        let (swept, _) = sweep(&inst, &exact_params).expect("few points");
        let rounded_params = BasecaseParams { eps: 0.25, mode: SweepMode::Rounded, ..exact_params };
        let (rounded, _) = sweep(&inst, &rounded_params).expect("few points");
        for s in [&out.schedule, &swept, &rounded] {
            assert!(validate_schedule(&inst, s).feasible);
        }
        let value = out.schedule.value();
        // Only computed when it can matter: the straddle-free optimum.
        let opt_ns = if value < opt || swept.value() < opt {
            brute_force_with_barriers(&inst, &barriers)
        } else {
            opt
        };
        if swept.value() != opt_ns {
            sweep_bad += 1;
        }
        if opt_ns == opt {
            straddle_free_optima += 1;
            if value != opt {
                equal_bad += 1;
            }
        }
        if value + straddles < opt {
            lower_bad += 1;
        }
        if (rounded.value() + straddles) as f64 + 1e-9 < (1.0 - 2.0 * rounded_params.eps) * swept.value() as f64 {
            rounded_bad += 1;
        }
    }
    outcome(
        sweep_bad == 0 && equal_bad == 0 && lower_bad == 0 && rounded_bad == 0,
        format!(
            "300 instances ({straddle_free_optima} with a straddle-free optimum): sweep != straddle-free opt {sweep_bad}, \
             != opt {equal_bad}, below opt-|S''| {lower_bad}, rounded below (1-2eps)exact-|S''| {rounded_bad}"
        ),
    )
}

fn tight_dp() -> Outcome {
    let mut rng = rng(808);
    let mut bad = 0;
    for t in 0..200 {
        let n = rng.gen_range(1..=12);
        let m = rng.gen_range(1..=2);
        let horizon: Time = 64;
        let jobs = (0..n)
            .map(|id| {
                let len = rng.gen_range(1..=16);
                let r = rng.gen_range(0..=horizon - len);
                Job::new(id, len, r, r + len)
            })
            .collect();
        let inst = Instance::new(jobs, m, vec![]).unwrap();
        let r0 = rng.gen_range(0..=inst.horizon() / 4);
        let part = partition_for(&inst, 0.5, r0, 4).unwrap();
        let (s, _) = solve_tight(&inst, &part, 0.5, DpCaps::disabled()).unwrap();
        let want = interval_mis(&inst);
        if s.value() != want || !validate_schedule(&inst, &s).feasible {
            eprintln!("  tight-dp trial {t}: got {}, interval MIS {want}", s.value());
            bad += 1;
        }
    }
    outcome(bad == 0, format!("200 interval sets, {bad} mismatches"))
}

fn full_pipeline() -> Outcome {
    let mut rng = rng(909);
    let mut below_half = 0;
    let mut ratio_sum = 0.0;
    let mut dp_ratio_sum = 0.0;
    let mut counted = 0;
    for t in 0..50u64 {
        let gen = GenParams {
            dist: [SpanDist::TightHeavy, SpanDist::LooseHeavy, SpanDist::Mixed][t as usize % 3],
            ..GenParams::new(rng.gen_range(1..=8), 1, rng.gen_range(1..=2), rng.gen_range(32..=64), 9000 + t)
        };
        let inst = generate_instance(&gen).unwrap();
        let opt = brute_force_opt(&inst);
        let params = PtasParams { offsets: 5, caps: DpCaps::disabled(), ..PtasParams::new(0.5, t) };
        let (s, report) = solve_full(&inst, &params).unwrap();
        assert!(validate_schedule(&inst, &s).feasible);
        if (s.value() as f64) < 0.5 * opt as f64 {
            below_half += 1;
        }
        if opt > 0 {
            ratio_sum += s.value() as f64 / opt as f64;
            dp_ratio_sum += report.dp_value as f64 / opt as f64;
            counted += 1;
        }
    }
    let avg = ratio_sum / counted.max(1) as f64;
    let dp_avg = dp_ratio_sum / counted.max(1) as f64;
    outcome(
        below_half == 0 && avg >= FULL_PIPELINE_AVERAGE_FLOOR,
        format!(
            "50 instances, {below_half} below opt/2, average ratio {avg:.3} (floor {FULL_PIPELINE_AVERAGE_FLOOR}), \
             DP alone {dp_avg:.3}"
        ),
    )
}

fn determinism() -> Outcome {
    let reg = SolverRegistry::with_builtins();
    let mut diffs = 0;
    let mut infeasible = 0;
    let mut runs = 0;
    for seed in 0..10u64 {
        let gen = GenParams::new(8, 1 + (seed as usize % 2), 2, 64, seed);
        let inst = generate_instance(&gen).unwrap();
        for name in reg.names() {
            let params = SolveParams { seed, oracle_time_budget_ms: 0, ..SolveParams::default() };
            let solver = reg.get(name).unwrap();
            let a = solver.solve(&inst, &params);
            let b = solver.solve(&inst, &params);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    runs += 1;
                    if schedule_to_json(&a.schedule) != schedule_to_json(&b.schedule) {
                        diffs += 1;
                    }
                    if !validate_schedule(&inst, &a.schedule).feasible {
                        infeasible += 1;
                    }
                }
                (Err(a), Err(b)) => {
                    if a.to_string() != b.to_string() {
                        diffs += 1;
                    }
                }
                _ => diffs += 1,
            }
        }
    }
    outcome(
        diffs == 0 && infeasible == 0,
        format!("{runs} paired runs, {diffs} differing, {infeasible} infeasible"),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let clock = Instant::now();
        let o = f();
        println!(
            "criterion {:>2} {:<22} {} ({:.1}s): {}",
            results.len() + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64(),
            o.detail
        );
        results.push((name, o));
    };
    run("oracle agreement", &oracle_agreement);
    run("greedy guarantee", &greedy_guarantee);
    let report = lemma_report();
    run("span crossing", &|| span_crossing(&report));
    run("position crossing", &|| position_crossing(&report));
    run("head/tail cutting", &|| head_tail(&report));
    run("multiple knapsack", &knapsack);
    run("base case", &base_case);
    run("tight dp", &tight_dp);
    run("full pipeline", &full_pipeline);
    run("determinism", &determinism);
    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
