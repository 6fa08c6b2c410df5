use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use hzreach::estimate::Method;
use hzreach_cli::commands::{self, MIN_REPEATS};
use hzreach_cli::config::{ExperimentConfig, Overrides};
use hzreach_cli::{exit, exit_code};

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Simulate identification episodes and the estimation run.
    Simulate,
    /// Build per-mode model sets from the simulated trajectories.
    Identify,
    /// Propagate reachable sets over the horizon.
    Reach,
    /// Run online set-based estimation.
    Estimate,
    /// Time the three measurement updates.
    Bench,
}

#[derive(Parser)]
#[command(name = "hzreach", version, about = "Data-driven reachability and set-based estimation with hybrid zonotopes")]
struct Args {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Horizon for reach and estimate.
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true, value_parser = ["rm", "in", "gi", "all"])]
    method: Option<String>,
    #[arg(long, global = true, default_value_t = 100)]
    repeats: usize,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("HZREACH_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("HZREACH_THREADS={v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(args: &Args) -> Result<()> {
    init_threads()?;
    let path = args.config.as_ref().context("--config is required")?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(&Overrides {
        out: args.out.clone(),
        steps: args.steps,
        method: args.method.clone(),
        seed: args.seed,
    })?;
    match args.command {
        Command::Simulate => {
            let sim = commands::run_simulate(&cfg)?;
            let rows: usize = sim.episodes.iter().map(Vec::len).sum();
            println!("simulated {} episodes ({rows} rows)", sim.episodes.len());
            if let Some(run) = &sim.estimation {
                println!("estimation run: {} steps", run.stream.len());
            }
        }
        Command::Identify => {
            let id = commands::run_identify(&cfg)?;
            for d in &id.diagnostics {
                println!("{d}");
            }
            println!(
                "wrote {} model sets{}",
                id.models.len(),
                if id.models_y.is_some() { " (state and output data)" } else { "" }
            );
        }
        Command::Reach => {
            let (summary, runs) = commands::run_reach(&cfg)?;
            for (kind, sizes) in &summary.runs {
                println!("{kind}: representation sizes {sizes:?}");
            }
            for r in &runs {
                let total: f64 = r.seconds.iter().sum();
                println!("{}: {:.3} s total", r.kind, total);
            }
            if let Some((hit, n)) = summary.containment {
                println!("containment: {hit}/{n} known-model samples inside the data-driven sets");
            }
        }
        Command::Estimate => {
            let s = commands::run_estimate(&cfg)?;
            println!("{} estimation: {} steps", s.method, s.steps.len());
            if !s.truth.is_empty() {
                let inside = s.truth.iter().filter(|(_, _, c)| *c).count();
                println!("true state contained in {inside}/{} sets", s.truth.len());
                for (label, k, c) in &s.truth {
                    if !c {
                        eprintln!("warning: {label} set at step {k} misses the true state");
                    }
                }
            }
            if let (Some(g), Some(st)) = (s.max_gap, s.max_stationarity) {
                println!("max support gap {g:.3e}, max stationarity residual {st:.3e}");
            }
        }
        Command::Bench => {
            if args.repeats < MIN_REPEATS {
                anyhow::bail!("--repeats must be at least {MIN_REPEATS}");
            }
            let res = commands::run_bench(&cfg, args.repeats)?;
            println!("{:<6}{:>12}{:>12}{:>12}{:>12}{:>12}{:>12}", "method", "mean", "median", "variance", "stddev", "min", "max");
            for (m, s) in &res.stats {
                println!(
                    "{:<6}{:>12.3e}{:>12.3e}{:>12.3e}{:>12.3e}{:>12.3e}{:>12.3e}",
                    m.to_string(),
                    s.mean,
                    s.median,
                    s.variance,
                    s.stddev,
                    s.min,
                    s.max
                );
            }
            if let (Some(rm), Some(gi), Some(inn)) = (res.median(Method::Rm), res.median(Method::Gi), res.median(Method::In)) {
                println!("median ordering RM < GI < IN: {}", rm < gi && gi < inn);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
