//! Command runners. Each reads its inputs from the output directory, writes its
//! artifacts there and returns a summary for the caller to print.

mod bench;
mod estimate;
mod identify;
mod reach;

pub use bench::{bench, build_workload, run_bench, BenchResult, Workload, MIN_REPEATS, WARMUP};
pub use estimate::{run_estimate, EstimateSummary, EstimatesDoc, StepDoc};
pub use identify::{identify, run_identify, Identified, ModeDiagnostics, ModelsDoc};
pub use reach::{run_reach, FamilyDoc, ReachDoc, ReachRun, ReachSummary, POLYGON_DIRECTIONS};

use anyhow::Result;
use hzreach::ident::{Episode, TrajectoryRow};

use crate::config::ExperimentConfig;
use crate::output::{self, indexed, nums, Output};
use crate::simulate::{simulate, SimRow, Simulation};

/// Episodes in the form read back by identification.
pub fn to_episodes(sim: &Simulation) -> Vec<Episode> {
    sim.episodes
        .iter()
        .map(|ep| {
            ep.iter()
                .map(|r| TrajectoryRow {
                    k: r.k,
                    x: r.x.clone(),
                    u: r.u.clone(),
                    y: r.y.clone(),
                })
                .collect()
        })
        .collect()
}

fn trajectory_text(episodes: &[Vec<SimRow>]) -> String {
    let Some(first) = episodes.iter().find_map(|e| e.first()) else {
        return String::new();
    };
    let mut header: Vec<String> = vec!["k".into()];
    header.extend(indexed("x", first.x.len()));
    header.extend(indexed("u", first.u.len()));
    if let Some(y) = &first.y {
        header.extend(indexed("y", y.len()));
    }
    header.push("mode".into());
    let mut out = header.join(",");
    out.push('\n');
    for (e, ep) in episodes.iter().enumerate() {
        if e > 0 {
            out.push('\n');
        }
        for r in ep {
            let mut f = vec![r.k.to_string()];
            f.extend(nums(r.x.iter()));
            f.extend(nums(r.u.iter()));
            if let Some(y) = &r.y {
                f.extend(nums(y.iter()));
            }
            f.push(r.mode.to_string());
            out.push_str(&f.join(","));
            out.push('\n');
        }
    }
    out
}

/// Writes the identification trajectories and, if configured, the estimation
/// measurements with the true states.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let sim = simulate(cfg)?;
    let out = Output::new(&cfg.output_dir)?;
    out.write_text(output::TRAJECTORY, &trajectory_text(&sim.episodes))?;
    if let Some(run) = &sim.estimation {
        out.write_text(output::MEASUREMENTS, &hzreach::estimate::format_measurements(&run.stream))?;
        let n = run.truth.first().map_or(0, |x| x.len());
        let mut header: Vec<String> = vec!["k".into()];
        header.extend(indexed("x", n));
        header.push("mode".into());
        let rows = run.truth.iter().zip(&run.modes).enumerate().map(|(k, (x, m))| {
            let mut f = vec![k.to_string()];
            f.extend(nums(x.iter()));
            f.push(m.to_string());
            f
        });
        out.write_csv(output::TRUTH, &header, rows)?;
    }
    Ok(sim)
}
