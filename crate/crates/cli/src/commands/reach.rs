use std::time::Instant;

use anyhow::{bail, Result};
use hzreach::oracle::{directions, LeafSet, OracleConfig, MEMBER_TOL};
use hzreach::reach::{known_models, reach_step_with, ReachFamily, ReachOptions};
use hzreach::setops::{HybridZonotope, MatrixZonotope};
use hzreach::Vector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::identify::ModelsDoc;
use crate::config::ExperimentConfig;
use crate::output::{self, indexed, num, Output};

/// Support directions per leaf outline.
pub const POLYGON_DIRECTIONS: usize = 64;

/// Known-model samples checked against the data-driven set at each step.
const CONTAINMENT_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDoc {
    pub step: usize,
    pub union: HybridZonotope,
    pub per_mode: Vec<HybridZonotope>,
    pub empty: Vec<bool>,
}

impl From<&ReachFamily> for FamilyDoc {
    fn from(f: &ReachFamily) -> Self {
        Self {
            step: f.step,
            union: f.union_set.clone(),
            per_mode: f.per_mode.clone(),
            empty: f.empty.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known: Option<Vec<FamilyDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<FamilyDoc>>,
}

/// One horizon run with its per-step wall times.
pub struct ReachRun {
    pub kind: &'static str,
    pub families: Vec<ReachFamily>,
    pub seconds: Vec<f64>,
    pub leaves: Vec<LeafSet>,
}

#[derive(Debug, Clone)]
pub struct ReachSummary {
    pub runs: Vec<(&'static str, Vec<usize>)>,
    /// `(contained, checked)` over all steps, when both runs exist.
    pub containment: Option<(usize, usize)>,
}

fn run_horizon(
    kind: &'static str,
    cfg: &ExperimentConfig,
    models: &[MatrixZonotope],
    opts: &ReachOptions,
) -> Result<ReachRun> {
    let spec = cfg.system_spec()?;
    let inputs = cfg.input_hybrids();
    let mut families = Vec::with_capacity(cfg.horizon + 1);
    let mut seconds = Vec::with_capacity(cfg.horizon + 1);
    let t = Instant::now();
    families.push(ReachFamily::with_config(0, cfg.initial_hybrid(), &spec.regions, &opts.oracle)?);
    seconds.push(t.elapsed().as_secs_f64());
    for _ in 0..cfg.horizon {
        let t = Instant::now();
        let prev = families.last().expect("nonempty");
        let next = reach_step_with(prev, models, &spec.regions, &inputs, &spec.noise_w, opts)?;
        seconds.push(t.elapsed().as_secs_f64());
        families.push(next);
    }
    let leaves = families
        .par_iter()
        .map(|f| LeafSet::with_config(&f.union_set, &opts.oracle))
        .collect::<hzreach::Result<Vec<_>>>()?;
    Ok(ReachRun {
        kind,
        families,
        seconds,
        leaves,
    })
}

/// Outline of each leaf from its support points, consecutive repeats dropped.
fn leaf_polygons(set: &LeafSet, dirs: &[Vector]) -> Vec<Vec<Vector>> {
    set.leaves()
        .iter()
        .map(|leaf| {
            let mut pts: Vec<Vector> = Vec::with_capacity(dirs.len());
            for d in dirs {
                let (_, p) = leaf.support_point(d);
                if pts.last().map_or(true, |q| (q - &p).amax() > 1e-9) {
                    pts.push(p);
                }
            }
            while pts.len() > 1 && (&pts[0] - pts.last().expect("nonempty")).amax() <= 1e-9 {
                pts.pop();
            }
            pts
        })
        .collect()
}

/// `(contained, checked)` per step: samples of the known-model set tested for
/// membership in the data-driven set.
fn containment(known: &ReachRun, data: &ReachRun, seed: u64) -> Result<Vec<(usize, usize)>> {
    known
        .leaves
        .par_iter()
        .zip(&data.leaves)
        .enumerate()
        .map(|(k, (inner, outer))| {
            if inner.is_empty() {
                return Ok((0, 0));
            }
            let pts = inner.sample(CONTAINMENT_SAMPLES, seed.wrapping_add(k as u64))?;
            let hit = pts.iter().filter(|x| outer.contains(x, MEMBER_TOL)).count();
            Ok((hit, pts.len()))
        })
        .collect()
}

/// Runs the data-driven horizon when `models.json` exists and the model-based
/// horizon when dynamics are configured; writes sets, outlines, sizes, timings
/// and the containment check between the two.
pub fn run_reach(cfg: &ExperimentConfig) -> Result<(ReachSummary, Vec<ReachRun>)> {
    let out = Output::new(&cfg.output_dir)?;
    let spec = cfg.system_spec()?;
    let opts = ReachOptions {
        hull_relaxation: cfg.reach.hull_relaxation,
        oracle: OracleConfig::default(),
    };
    let mut runs = Vec::new();
    if spec.modes.is_some() {
        runs.push(run_horizon("known", cfg, &known_models(&spec)?, &opts)?);
    }
    if out.exists(output::MODELS) {
        let doc: ModelsDoc = out.read_json(output::MODELS)?;
        runs.push(run_horizon("data", cfg, &doc.models, &opts)?);
    }
    if runs.is_empty() {
        bail!("reach needs system.modes or {} from identify", output::MODELS);
    }

    let find = |kind: &str| runs.iter().find(|r| r.kind == kind);
    let docs = |kind: &str| find(kind).map(|r| r.families.iter().map(FamilyDoc::from).collect());
    out.write_json(
        output::REACH,
        &ReachDoc {
            known: docs("known"),
            data: docs("data"),
        },
    )?;

    let header = |cols: &[&str]| cols.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mut sizes = Vec::new();
    let mut times = Vec::new();
    for r in &runs {
        for (k, (f, l)) in r.families.iter().zip(&r.leaves).enumerate() {
            let u = &f.union_set;
            sizes.push(vec![
                r.kind.to_string(),
                k.to_string(),
                u.num_cont().to_string(),
                u.num_bin().to_string(),
                u.num_cons().to_string(),
                u.complexity().to_string(),
                l.leaves().len().to_string(),
            ]);
            times.push(vec![r.kind.to_string(), k.to_string(), num(r.seconds[k])]);
        }
    }
    out.write_csv(
        output::SIZES,
        &header(&["kind", "step", "continuous", "binary", "constraints", "complexity", "leaves"]),
        sizes,
    )?;
    out.write_csv(output::REACH_TIMES, &header(&["kind", "step", "seconds"]), times)?;

    if spec.state_dim() == 2 {
        let dirs = directions(2, POLYGON_DIRECTIONS);
        let mut rows = Vec::new();
        for r in &runs {
            let outlines: Vec<Vec<Vec<Vector>>> = r.leaves.par_iter().map(|l| leaf_polygons(l, &dirs)).collect();
            for (k, leaves) in outlines.iter().enumerate() {
                for (j, poly) in leaves.iter().enumerate() {
                    for (v, p) in poly.iter().enumerate() {
                        rows.push(vec![r.kind.to_string(), k.to_string(), j.to_string(), v.to_string(), num(p[0]), num(p[1])]);
                    }
                }
            }
        }
        let mut h = header(&["kind", "step", "leaf", "vertex"]);
        h.extend(indexed("x", 2));
        out.write_csv(output::POLYGONS, &h, rows)?;
    }

    let check = match (find("known"), find("data")) {
        (Some(known), Some(data)) => {
            let per_step = containment(known, data, cfg.seed)?;
            out.write_csv(
                output::CONTAINMENT,
                &header(&["step", "contained", "checked"]),
                per_step
                    .iter()
                    .enumerate()
                    .map(|(k, (hit, n))| vec![k.to_string(), hit.to_string(), n.to_string()]),
            )?;
            Some(per_step.iter().fold((0, 0), |(a, b), (h, n)| (a + h, b + n)))
        }
        _ => None,
    };
    let summary = ReachSummary {
        runs: runs
            .iter()
            .map(|r| (r.kind, r.families.iter().map(ReachFamily::complexity).collect()))
            .collect(),
        containment: check,
    };
    Ok((summary, runs))
}
