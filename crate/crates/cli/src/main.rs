use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use throughput::harness::bench::{run_bench, BenchConfig};
use throughput::harness::generate::{generate_instance, GenParams, SpanDist};
use throughput::harness::lemmas::{validate_lemmas, LemmaConfig};
use throughput::instance::{load_instance, validate_schedule, write_instance, write_schedule};
use throughput::ptas::DpCaps;
use throughput::{SolveParams, SolverRegistry, Time};

/// Output contained an infeasible schedule.
const EXIT_DEFECT: u8 = 2;
/// A work budget ran out; any output is a fallback.
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "tput", version, about = "Throughput maximization with release times and deadlines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance.
    Generate(GenerateArgs),
    /// Solve an instance with one of the registered solvers.
    Solve(SolveArgs),
    /// Run several solvers over generated instances and write a CSV table.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the decomposition's loss bounds by sampling offsets.
    ValidateLemmas {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    c: usize,
    #[arg(long = "T")]
    horizon: Time,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SpanDist::Mixed)]
    dist: SpanDist,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    algo: String,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Random offsets tried by full-ptas.
    #[arg(long, default_value_t = 1)]
    offsets: usize,
    /// Wall-clock limit for the exact solver; 0 means none.
    #[arg(long, default_value_t = 0)]
    oracle_budget_ms: u64,
    /// Lift every enumeration cap of the dynamic program.
    #[arg(long)]
    no_caps: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let params = GenParams {
        n: args.n,
        m: args.m,
        c: args.c,
        horizon: args.horizon,
        seed: args.seed,
        dist: args.dist,
    };
    let inst = generate_instance(&params)?;
    let mut w = create(&args.out)?;
    write_instance(&inst, &mut w)?;
    w.flush()?;
    info!("wrote {} jobs to {}", inst.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let registry = SolverRegistry::with_builtins();
    let Some(solver) = registry.get(&args.algo) else {
        bail!("unknown algorithm {:?}; choose one of {}", args.algo, registry.names().join(", "));
    };
    let loaded = load_instance(open(&args.input)?)
        .with_context(|| format!("cannot read instance {}", args.input.display()))?;
    if !loaded.excluded.is_empty() {
        warn!("{} job(s) cannot fit their window and were excluded", loaded.excluded.len());
    }
    let inst = loaded.instance;
    let params = SolveParams {
        eps: args.eps,
        seed: args.seed,
        offsets: args.offsets,
        caps: if args.no_caps { DpCaps::disabled() } else { DpCaps::default() },
        oracle_time_budget_ms: args.oracle_budget_ms,
    };
    let outcome = match solver.solve(&inst, &params) {
        Ok(o) => o,
        Err(e) if e.is_budget() => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_BUDGET));
        }
        Err(e) => return Err(e.into()),
    };
    let report = validate_schedule(&inst, &outcome.schedule);
    if !report.feasible {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        eprintln!("error: {} produced an infeasible schedule; nothing written", solver.name());
        return Ok(ExitCode::from(EXIT_DEFECT));
    }
    let mut w = create(&args.out)?;
    write_schedule(&outcome.schedule, &mut w)?;
    w.flush()?;

    let summary = match &outcome.report {
        Some(r) => serde_json::to_string(r)?,
        None => serde_json::json!({
            "value": outcome.schedule.value(),
            "truncated": outcome.truncated,
            "proven_optimal": outcome.proven_optimal,
        })
        .to_string(),
    };
    println!("{summary}");
    if outcome.budget_exhausted {
        warn!("{} ran out of budget; the schedule is a fallback", solver.name());
        return Ok(ExitCode::from(EXIT_BUDGET));
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(config: &Path, out: &Path) -> Result<ExitCode> {
    let text = std::fs::read_to_string(config).with_context(|| format!("cannot read {}", config.display()))?;
    let cfg = BenchConfig::from_json(&text)?;
    let result = run_bench(&cfg, &SolverRegistry::with_builtins())?;
    let mut w = create(out)?;
    result.write_csv(&mut w)?;
    w.flush()?;
    info!("wrote {} rows to {}", result.rows.len(), out.display());
    if result.defects() > 0 {
        eprintln!("error: {} infeasible schedule(s), see feasible=false rows", result.defects());
        return Ok(ExitCode::from(EXIT_DEFECT));
    }
    if result.budget_hits() > 0 {
        warn!("{} run(s) exhausted a budget", result.budget_hits());
        return Ok(ExitCode::from(EXIT_BUDGET));
    }
    Ok(ExitCode::SUCCESS)
}

fn lemmas(config: &Path, out: &Path) -> Result<ExitCode> {
    let text = std::fs::read_to_string(config).with_context(|| format!("cannot read {}", config.display()))?;
    let cfg: LemmaConfig = serde_json::from_str(&text)?;
    let report = validate_lemmas(&cfg)?;
    let mut w = create(out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    for (name, pass) in [
        ("span crossing", report.span_crossing.pass),
        ("position crossing", report.position_crossing.pass),
        ("head/tail", report.head_tail.pass),
    ] {
        println!("{name}: {}", if pass { "pass" } else { "FAIL" });
    }
    let all = report.span_crossing.pass && report.position_crossing.pass && report.head_tail.pass;
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Bench { config, out } => bench(&config, &out),
        Command::ValidateLemmas { config, out } => lemmas(&config, &out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
