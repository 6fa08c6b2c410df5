use anyhow::{bail, Context, Result};
use hzreach::estimate::{estimate_online, parse_measurements, EquivalenceReport, EstimateStep, Method};
use hzreach::oracle::{LeafSet, MEMBER_TOL};
use hzreach::reach::known_models;
use hzreach::setops::{HybridZonotope, MatrixZonotope};
use hzreach::Vector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::identify::ModelsDoc;
use crate::config::{ExperimentConfig, ModelSource};
use crate::output::{self, indexed, num, parse_truth, Output};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDoc {
    pub step: usize,
    pub corrected: HybridZonotope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rm: Option<HybridZonotope>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "in")]
    pub in_set: Option<HybridZonotope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gi: Option<HybridZonotope>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesDoc {
    pub method: String,
    pub steps: Vec<StepDoc>,
}

#[derive(Debug, Clone)]
pub struct EstimateSummary {
    pub method: Method,
    pub steps: Vec<EstimateStep>,
    /// `(label, step, contained)` for every reported set, when truth is known.
    pub truth: Vec<(String, usize, bool)>,
    /// Largest support gap over all steps and pairs (ALL only).
    pub max_gap: Option<f64>,
    pub max_stationarity: Option<f64>,
}

impl EstimateSummary {
    pub fn all_contained(&self) -> bool {
        self.truth.iter().all(|(_, _, c)| *c)
    }
}

/// Sets reported for one step, labelled by method.
fn labelled(method: Method, s: &EstimateStep) -> Vec<(String, &HybridZonotope)> {
    match &s.comparison {
        Some(c) => vec![("RM".into(), &c.rm), ("IN".into(), &c.in_set), ("GI".into(), &c.gi)],
        None => vec![(method.to_string(), &s.corrected)],
    }
}

fn models_for(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<MatrixZonotope>> {
    match cfg.estimation.model_source {
        ModelSource::Known => Ok(known_models(&cfg.system_spec()?)?),
        ModelSource::Data => {
            if !out.exists(output::MODELS_Y) {
                bail!(
                    "{} not found; run identify with outputs logged and estimation.a_bound set",
                    output::MODELS_Y
                );
            }
            Ok(out.read_json::<ModelsDoc>(output::MODELS_Y)?.models)
        }
    }
}

/// Runs online estimation over the recorded measurements and writes the
/// corrected sets, their interval bounds and, in ALL mode, the equivalence report.
pub fn run_estimate(cfg: &ExperimentConfig) -> Result<EstimateSummary> {
    let out = Output::new(&cfg.output_dir)?;
    let spec = cfg.system_spec()?;
    let method = cfg.method()?;
    let stream = parse_measurements(&out.read(output::MEASUREMENTS)?)?;
    let models = models_for(cfg, &out)?;
    let steps = estimate_online(
        &cfg.initial_hybrid(),
        &stream,
        &models,
        &spec.regions,
        &spec.sensors,
        &spec.noise_w,
        method,
        cfg.estimation.steps,
        &cfg.estimate_options()?,
    )
    .context("estimation")?;
    let truth: Option<Vec<Vector>> = if out.exists(output::TRUTH) {
        Some(parse_truth(&out.read(output::TRUTH)?)?)
    } else {
        None
    };

    out.write_json(
        output::ESTIMATES,
        &EstimatesDoc {
            method: method.to_string(),
            steps: steps
                .iter()
                .map(|s| StepDoc {
                    step: s.step,
                    corrected: s.corrected.clone(),
                    rm: s.comparison.as_ref().map(|c| c.rm.clone()),
                    in_set: s.comparison.as_ref().map(|c| c.in_set.clone()),
                    gi: s.comparison.as_ref().map(|c| c.gi.clone()),
                })
                .collect(),
        },
    )?;

    // Hulls and truth membership per labelled set, computed in parallel.
    let jobs: Vec<(usize, String, &HybridZonotope)> = steps
        .iter()
        .flat_map(|s| labelled(method, s).into_iter().map(move |(l, z)| (s.step, l, z)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|(k, _, z)| {
            let set = LeafSet::new(z)?;
            let inside = truth.as_ref().and_then(|t| t.get(*k)).map(|x| set.contains(x, MEMBER_TOL));
            Ok((set.interval_hull(), inside))
        })
        .collect::<hzreach::Result<Vec<_>>>()?;
    let n = spec.state_dim();
    let mut header: Vec<String> = vec!["step".into(), "method".into()];
    header.extend(indexed("lo", n));
    header.extend(indexed("hi", n));
    header.push("truth_contained".into());
    let mut rows = Vec::new();
    let mut truth_flags = Vec::new();
    for ((k, label, _), (hull, inside)) in jobs.iter().zip(&results) {
        let mut r = vec![k.to_string(), label.clone()];
        match hull {
            Some(h) => {
                r.extend(h.lower.iter().map(|v| num(*v)));
                r.extend(h.upper.iter().map(|v| num(*v)));
            }
            None => r.extend(std::iter::repeat(String::new()).take(2 * n)),
        }
        r.push(inside.map_or(String::new(), |c| c.to_string()));
        rows.push(r);
        if let Some(c) = inside {
            truth_flags.push((label.clone(), *k, *c));
        }
    }
    out.write_csv(output::BOUNDS, &header, rows)?;

    let (mut max_gap, mut max_stat) = (None, None);
    if method == Method::All {
        let header: Vec<String> = [
            "step",
            "pair",
            "max_gap",
            "directions",
            "samples",
            "a_in_b",
            "b_in_a",
            "within_tol",
            "stationarity",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut rows = Vec::new();
        for s in &steps {
            let Some(c) = &s.comparison else { continue };
            let pairs: [(&str, &EquivalenceReport); 3] = [("RM-GI", &c.rm_gi), ("RM-IN", &c.rm_in), ("GI-IN", &c.gi_in)];
            for (name, r) in pairs {
                rows.push(vec![
                    s.step.to_string(),
                    name.to_string(),
                    num(r.max_gap),
                    r.directions.to_string(),
                    r.samples.to_string(),
                    r.a_in_b.to_string(),
                    r.b_in_a.to_string(),
                    r.within_tol.to_string(),
                    num(c.stationarity),
                ]);
            }
            max_gap = Some(max_gap.unwrap_or(0.0f64).max(c.max_gap()));
            max_stat = Some(max_stat.unwrap_or(0.0f64).max(c.stationarity));
        }
        out.write_csv(output::EQUIVALENCE, &header, rows)?;
    } else {
        out.remove(output::EQUIVALENCE)?;
    }
    Ok(EstimateSummary {
        method,
        steps,
        truth: truth_flags,
        max_gap,
        max_stationarity: max_stat,
    })
}
