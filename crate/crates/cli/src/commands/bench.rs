use std::hint::black_box;
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Context, Result};
use hzreach::estimate::{
    default_null_bound, estimate_online, in_weights, update_gi, update_in_with_weights, update_rm_prepared,
    EstimateOptions, Method, NullBound, PreparedSensor, SensorReading,
};
use hzreach::ident::Sensor;
use hzreach::reach::{known_models, propagate_family, ReachFamily, ReachOptions};
use hzreach::setops::{HybridZonotope, MatrixZonotope};

use super::identify::identify;
use super::to_episodes;
use crate::config::{ExperimentConfig, ModelSource};
use crate::output::{self, num, Output};
use crate::simulate::simulate;
use crate::stats::{Summary, COLUMNS};

/// Untimed iterations per method before recording.
pub const WARMUP: usize = 5;

pub const MIN_REPEATS: usize = 30;

const METHODS: [Method; 3] = [Method::Rm, Method::Gi, Method::In];

/// One measurement update: the predicted pieces at the benchmark step and the
/// readings that correct them. Everything that depends only on the sensors or
/// on the null-bound policy is computed here, and the implicit update skips its
/// diagnostics, so that every method times the update alone.
pub struct Workload {
    pub step: usize,
    pub pieces: Vec<HybridZonotope>,
    pub null_bounds: Vec<f64>,
    pub readings: Vec<SensorReading>,
    pub sensors: Vec<Sensor>,
    pub prepared: Vec<PreparedSensor>,
    pub alpha: f64,
}

impl Workload {
    /// Corrects every piece with `method` and unions the results.
    pub fn run(&self, method: Method) -> Result<HybridZonotope> {
        let parts = self
            .pieces
            .iter()
            .zip(&self.null_bounds)
            .map(|(p, &m)| match method {
                Method::Rm => update_rm_prepared(p, &self.readings, &self.prepared, m),
                Method::In => in_weights(p, &self.readings, &self.prepared, self.alpha)
                    .and_then(|lam| update_in_with_weights(p, &self.readings, &self.sensors, &lam)),
                Method::Gi => update_gi(p, &self.readings, &self.sensors),
                Method::All => Err(hzreach::Error::InvalidInput("bench times single methods".into())),
            })
            .collect::<hzreach::Result<Vec<_>>>()?;
        Ok(HybridZonotope::union_all(&parts)?)
    }
}

fn models(cfg: &ExperimentConfig, episodes: &[hzreach::ident::Episode]) -> Result<Vec<MatrixZonotope>> {
    match cfg.estimation.model_source {
        ModelSource::Known => Ok(known_models(&cfg.system_spec()?)?),
        ModelSource::Data => identify(cfg, episodes)?
            .models_y
            .ok_or_else(|| anyhow!("bench with data models needs sensors and estimation.a_bound")),
    }
}

/// Simulates the configured scenario, runs the GI chain up to the step before
/// `estimation.bench_step` and predicts that step.
pub fn build_workload(cfg: &ExperimentConfig) -> Result<Workload> {
    let spec = cfg.system_spec()?;
    let k = cfg.estimation.bench_step;
    ensure!(k >= 1, "estimation.bench_step must be at least 1");
    let sim = simulate(cfg)?;
    let models = models(cfg, &to_episodes(&sim))?;
    let run = sim
        .estimation
        .ok_or_else(|| anyhow!("bench needs sensors and an initial_state"))?;
    ensure!(k < run.stream.len(), "estimation.bench_step {k} exceeds estimation.steps");
    let opts = EstimateOptions {
        alpha: cfg.estimation.alpha,
        ..EstimateOptions::default()
    };
    let chain = estimate_online(
        &cfg.initial_hybrid(),
        &run.stream,
        &models,
        &spec.regions,
        &spec.sensors,
        &spec.noise_w,
        Method::Gi,
        k - 1,
        &opts,
    )
    .context("estimation chain for the benchmark workload")?;
    let prev = ReachFamily::new(k - 1, chain.last().expect("nonempty").corrected.clone(), &spec.regions)?;
    let u = HybridZonotope::point(run.stream[k - 1].u.clone());
    let pred = propagate_family(
        &prev,
        &models,
        &vec![u; spec.regions.len()],
        &spec.noise_w,
        &ReachOptions::default(),
    )?;
    let fam = ReachFamily::new(k, pred, &spec.regions)?;
    let pieces: Vec<HybridZonotope> = fam
        .per_mode
        .iter()
        .zip(&fam.empty)
        .filter(|(_, e)| !**e)
        .map(|(p, _)| p.clone())
        .collect();
    let null_bounds = pieces
        .iter()
        .map(|p| match cfg.null_bound()? {
            NullBound::Auto => Ok(default_null_bound(p)?),
            NullBound::Fixed(m) => Ok(m),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Workload {
        step: k,
        pieces,
        null_bounds,
        readings: run.stream[k].readings.clone(),
        prepared: PreparedSensor::prepare_all(&spec.sensors),
        sensors: spec.sensors,
        alpha: cfg.estimation.alpha,
    })
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    /// Per-method run times in seconds, in `RM, GI, IN` order.
    pub samples: Vec<(Method, Vec<f64>)>,
    pub stats: Vec<(Method, Summary)>,
}

impl BenchResult {
    pub fn median(&self, m: Method) -> Option<f64> {
        self.stats.iter().find(|(k, _)| *k == m).map(|(_, s)| s.median)
    }
}

/// Times `repeats` updates per method after the warm-up. Rounds rotate the
/// method order so that no method always runs first.
pub fn bench(w: &Workload, repeats: usize) -> Result<BenchResult> {
    if repeats < MIN_REPEATS {
        bail!("bench needs at least {MIN_REPEATS} repeats, got {repeats}");
    }
    for m in METHODS {
        for _ in 0..WARMUP {
            black_box(w.run(m)?);
        }
    }
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(repeats); METHODS.len()];
    for r in 0..repeats {
        for i in 0..METHODS.len() {
            let j = (r + i) % METHODS.len();
            let t = Instant::now();
            black_box(w.run(METHODS[j])?);
            samples[j].push(t.elapsed().as_secs_f64());
        }
    }
    let stats = METHODS
        .iter()
        .zip(&samples)
        .map(|(m, s)| (*m, Summary::of(s).expect("repeats > 0")))
        .collect();
    Ok(BenchResult {
        samples: METHODS.iter().cloned().zip(samples).collect(),
        stats,
    })
}

/// Runs the benchmark and writes the raw timings and the statistics table.
pub fn run_bench(cfg: &ExperimentConfig, repeats: usize) -> Result<BenchResult> {
    let w = build_workload(cfg)?;
    let res = bench(&w, repeats)?;
    let out = Output::new(&cfg.output_dir)?;
    let header: Vec<String> = ["method", "run", "seconds", "seed"].iter().map(|s| s.to_string()).collect();
    let rows = res.samples.iter().flat_map(|(m, s)| {
        s.iter()
            .enumerate()
            .map(move |(i, t)| vec![m.to_string(), i.to_string(), num(*t), cfg.seed.to_string()])
    });
    out.write_csv(output::TIMING, &header, rows)?;
    let mut header = vec!["method".to_string()];
    header.extend(COLUMNS.iter().map(|s| s.to_string()));
    let rows = res.stats.iter().map(|(m, s)| {
        let mut r = vec![m.to_string()];
        r.extend(s.values().iter().map(|v| num(*v)));
        r
    });
    out.write_csv(output::TIMING_STATS, &header, rows)?;
    Ok(res)
}
