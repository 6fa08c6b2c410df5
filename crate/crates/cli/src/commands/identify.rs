use anyhow::{Context, Result};
use hzreach::ident::{
    build_model_set, build_model_set_from_outputs, noise_matrix_zonotope, parse_trajectories, partition_trajectories,
    transitions, Episode, RANK_TOL,
};
use hzreach::linalg::rank;
use hzreach::setops::MatrixZonotope;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{self, Output};

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDiagnostics {
    pub mode: usize,
    pub samples: usize,
    pub rank: usize,
    pub required: usize,
    pub sigma_min: f64,
}

impl std::fmt::Display for ModeDiagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "mode {}: {} samples, rank {}/{}, smallest singular value {:.3e}",
            self.mode, self.samples, self.rank, self.required, self.sigma_min
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsDoc {
    pub models: Vec<MatrixZonotope>,
}

#[derive(Debug, Clone)]
pub struct Identified {
    pub models: Vec<MatrixZonotope>,
    /// Output-data model sets, present when outputs were logged and a norm
    /// bound for `A` is configured.
    pub models_y: Option<Vec<MatrixZonotope>>,
    pub diagnostics: Vec<ModeDiagnostics>,
}

/// Model sets of every mode from recorded episodes.
///
/// Diagnostics are returned with the error when some mode is rank deficient.
pub fn identify(cfg: &ExperimentConfig, episodes: &[Episode]) -> Result<Identified> {
    let spec = cfg.system_spec()?;
    let raw = transitions(episodes);
    let data = partition_trajectories(&raw, &spec.regions)?;
    let diagnostics: Vec<ModeDiagnostics> = data
        .iter()
        .map(|d| {
            let m = d.data_matrix();
            let sigma_min = if m.ncols() >= m.nrows() { m.singular_values().min() } else { 0.0 };
            ModeDiagnostics {
                mode: d.mode_index,
                samples: d.len(),
                rank: rank(&m, RANK_TOL),
                required: m.nrows(),
                sigma_min,
            }
        })
        .collect();
    let report = || diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ");
    let models = data
        .iter()
        .map(|d| build_model_set(d, &noise_matrix_zonotope(&spec.noise_w, d.len())))
        .collect::<hzreach::Result<Vec<_>>>()
        .with_context(report)?;
    let with_outputs = !spec.sensors.is_empty() && raw.iter().all(|t| t.y.is_some());
    let models_y = match (with_outputs, cfg.estimation.a_bound) {
        (true, Some(a_bound)) => Some(
            data.iter()
                .map(|d| build_model_set_from_outputs(d, &spec.sensors, &spec.noise_w, a_bound))
                .collect::<hzreach::Result<Vec<_>>>()
                .context("identification from outputs")?,
        ),
        _ => None,
    };
    Ok(Identified {
        models,
        models_y,
        diagnostics,
    })
}

/// Reads the trajectory file, identifies every mode and writes the model sets.
pub fn run_identify(cfg: &ExperimentConfig) -> Result<Identified> {
    let out = Output::new(&cfg.output_dir)?;
    let episodes = parse_trajectories(&out.read(output::TRAJECTORY)?)?;
    let id = identify(cfg, &episodes)?;
    out.write_json(output::MODELS, &ModelsDoc { models: id.models.clone() })?;
    if let Some(my) = &id.models_y {
        out.write_json(output::MODELS_Y, &ModelsDoc { models: my.clone() })?;
    }
    Ok(id)
}
