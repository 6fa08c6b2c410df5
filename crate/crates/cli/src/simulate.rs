//! Closed-loop simulation of the configured PWA system.

use anyhow::{anyhow, bail, Result};
use hzreach::estimate::{SensorReading, StreamStep};
use hzreach::ident::{PwaSystemSpec, Sensor};
use hzreach::setops::Zonotope;
use hzreach::Vector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::rng;

/// One logged step: state, applied input, stacked outputs and the active mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub k: usize,
    pub x: Vector,
    pub u: Vector,
    pub y: Option<Vector>,
    pub mode: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRun {
    pub stream: Vec<StreamStep>,
    /// `x(0..=steps)`.
    pub truth: Vec<Vector>,
    pub modes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub episodes: Vec<Vec<SimRow>>,
    pub estimation: Option<EstimationRun>,
}

/// Uniform draw from the factor box of `z`.
pub fn draw(z: &Zonotope, rng: &mut ChaCha8Rng) -> Vector {
    let beta = Vector::from_fn(z.num_generators(), |_, _| rng.gen_range(-1.0..=1.0));
    z.point_at(&beta)
}

fn readings(sensors: &[Sensor], x: &Vector, k: usize, rng: &mut ChaCha8Rng) -> Vec<SensorReading> {
    sensors
        .iter()
        .enumerate()
        .map(|(j, s)| SensorReading {
            sensor: j,
            y: &s.c * x + draw(&s.noise, rng),
            step: k,
        })
        .collect()
}

fn stacked(r: &[SensorReading]) -> Option<Vector> {
    if r.is_empty() {
        return None;
    }
    let parts: Vec<&Vector> = r.iter().map(|r| &r.y).collect();
    Some(hzreach::linalg::vcat(&parts))
}

/// Rolls the system forward `len` transitions from `x0`, logging `len + 1` rows.
fn episode(
    spec: &PwaSystemSpec,
    input: &Zonotope,
    x0: Vector,
    len: usize,
    rng: &mut ChaCha8Rng,
    label: &str,
) -> Result<(Vec<SimRow>, Vec<Vec<SensorReading>>)> {
    let modes = spec
        .modes
        .as_ref()
        .ok_or_else(|| anyhow!("simulation needs system.modes"))?;
    let mut rows = Vec::with_capacity(len + 1);
    let mut reads = Vec::with_capacity(len + 1);
    let mut x = x0;
    for k in 0..=len {
        let Some(mode) = spec.mode_at(&x) else {
            bail!("{label}: state {:?} at step {k} lies in no region", x.as_slice());
        };
        let r = readings(&spec.sensors, &x, k, rng);
        let u = draw(input, rng);
        let w = draw(&spec.noise_w, rng);
        let next = modes[mode].step(&x, &u) + w;
        rows.push(SimRow {
            k,
            x: x.clone(),
            u,
            y: stacked(&r),
            mode,
        });
        reads.push(r);
        x = next;
    }
    Ok((rows, reads))
}

/// Identification episodes and, when sensors and an initial state are given, an
/// estimation run of `estimation.steps` steps from that state.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let spec = cfg.system_spec()?;
    let start = cfg.data.start_set.as_ref().unwrap_or(&cfg.initial_set);
    let mut data_rng = rng(cfg.seed, 0);
    let mut episodes = Vec::with_capacity(cfg.data.episodes);
    for e in 0..cfg.data.episodes {
        let x0 = draw(start, &mut data_rng);
        let (rows, _) = episode(&spec, &cfg.input_set, x0, cfg.data.length, &mut data_rng, &format!("episode {e}"))?;
        episodes.push(rows);
    }
    let estimation = match (&cfg.initial_state, spec.sensors.is_empty()) {
        (Some(_), false) => {
            let mut est_rng = rng(cfg.seed, 1);
            let (rows, reads) = episode(
                &spec,
                &cfg.input_set,
                cfg.initial_state()?,
                cfg.estimation.steps,
                &mut est_rng,
                "estimation run",
            )?;
            Some(EstimationRun {
                stream: rows
                    .iter()
                    .zip(reads)
                    .map(|(r, readings)| StreamStep {
                        u: r.u.clone(),
                        readings,
                    })
                    .collect(),
                truth: rows.iter().map(|r| r.x.clone()).collect(),
                modes: rows.iter().map(|r| r.mode).collect(),
            })
        }
        _ => None,
    };
    Ok(Simulation { episodes, estimation })
}
