//! Experiment configuration: one JSON document, matrices as row-major nested arrays.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use hzreach::estimate::{EstimateOptions, Method, NullBound};
use hzreach::ident::{Mode, PwaSystemSpec, Sensor};
use hzreach::setops::doc::{matrix_from_rows, Rows};
use hzreach::setops::{HybridZonotope, PolyhedralRegion, Zonotope};
use hzreach::Vector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    #[serde(rename = "C")]
    pub c: Rows,
    pub noise: Zonotope,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub modes: Option<Vec<ModeConfig>>,
    pub regions: Vec<PolyhedralRegion>,
    pub noise_w: Zonotope,
    #[serde(default)]
    pub sensors: Vec<SensorConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    /// Transitions per episode.
    #[serde(default = "default_length")]
    pub length: usize,
    /// Where episode start states are drawn; defaults to the initial set.
    #[serde(default)]
    pub start_set: Option<Zonotope>,
}

fn default_episodes() -> usize {
    2
}

fn default_length() -> usize {
    25
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            episodes: default_episodes(),
            length: default_length(),
            start_set: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSource {
    /// Model sets identified from the simulated output data.
    Data,
    /// Singleton model sets from the configured dynamics.
    Known,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NullBoundConfig {
    Named(String),
    Value(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_null_bound")]
    pub null_bound: NullBoundConfig,
    /// Bound on `‖A‖∞` used when identifying from outputs.
    #[serde(default)]
    pub a_bound: Option<f64>,
    #[serde(default = "default_source")]
    pub model_source: ModelSource,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Prediction step whose measurement update is timed by `bench`.
    #[serde(default = "default_bench_step")]
    pub bench_step: usize,
}

fn default_method() -> String {
    "all".into()
}

fn default_alpha() -> f64 {
    1.0
}

fn default_null_bound() -> NullBoundConfig {
    NullBoundConfig::Named("auto".into())
}

fn default_source() -> ModelSource {
    ModelSource::Data
}

fn default_steps() -> usize {
    20
}

fn default_bench_step() -> usize {
    5
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            alpha: default_alpha(),
            null_bound: default_null_bound(),
            a_bound: None,
            model_source: default_source(),
            steps: default_steps(),
            bench_step: default_bench_step(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachConfig {
    #[serde(default)]
    pub hull_relaxation: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub system: SystemConfig,
    pub initial_set: Zonotope,
    /// True initial state of the estimation run.
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
    pub input_set: Zonotope,
    /// Per-mode input sets; every mode uses `input_set` when absent.
    #[serde(default)]
    pub input_sets: Option<Vec<Zonotope>>,
    pub horizon: usize,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub reach: ReachConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.system_spec()?;
        let n = spec.state_dim();
        ensure!(self.initial_set.dim() == n, "initial_set has dimension {}, state has {n}", self.initial_set.dim());
        if let Some(x0) = &self.initial_state {
            ensure!(x0.len() == n, "initial_state has {} entries, state has {n}", x0.len());
        }
        if let Some(sets) = &self.input_sets {
            ensure!(sets.len() == spec.num_modes(), "input_sets needs one set per region");
            for s in sets {
                ensure!(s.dim() == self.input_set.dim(), "input sets differ in dimension");
            }
        }
        if let Some(modes) = &spec.modes {
            let m = modes[0].b.ncols();
            ensure!(self.input_set.dim() == m, "input_set has dimension {}, modes take {m} inputs", self.input_set.dim());
        }
        if let Some(z) = &self.data.start_set {
            ensure!(z.dim() == n, "data.start_set has dimension {}, state has {n}", z.dim());
        }
        self.method()?;
        self.null_bound()?;
        ensure!(self.estimation.alpha > 0.0, "estimation.alpha must be positive");
        Ok(())
    }

    pub fn system_spec(&self) -> Result<PwaSystemSpec> {
        let modes = match &self.system.modes {
            None => None,
            Some(ms) => Some(
                ms.iter()
                    .enumerate()
                    .map(|(i, m)| {
                        let a = matrix_from_rows("A", &m.a)?;
                        let b = matrix_from_rows("B", &m.b)?;
                        Mode::new(a, b).with_context(|| format!("mode {i}"))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let sensors = self
            .system
            .sensors
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let c = matrix_from_rows("C", &s.c)?;
                Sensor::new(c, s.noise.clone()).with_context(|| format!("sensor {j}"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PwaSystemSpec::new(
            modes,
            self.system.regions.clone(),
            self.system.noise_w.clone(),
            sensors,
        )?)
    }

    pub fn initial_hybrid(&self) -> HybridZonotope {
        HybridZonotope::from_zonotope(&self.initial_set)
    }

    pub fn initial_state(&self) -> Result<Vector> {
        match &self.initial_state {
            Some(x) => Ok(Vector::from_column_slice(x)),
            None => bail!("configuration has no initial_state"),
        }
    }

    /// One input set per region.
    pub fn input_hybrids(&self) -> Vec<HybridZonotope> {
        match &self.input_sets {
            Some(sets) => sets.iter().map(HybridZonotope::from_zonotope).collect(),
            None => vec![HybridZonotope::from_zonotope(&self.input_set); self.system.regions.len()],
        }
    }

    pub fn method(&self) -> Result<Method> {
        self.estimation
            .method
            .parse::<Method>()
            .map_err(|e| anyhow::anyhow!("estimation.method: {e}"))
    }

    pub fn null_bound(&self) -> Result<NullBound> {
        match &self.estimation.null_bound {
            NullBoundConfig::Named(s) if s == "auto" => Ok(NullBound::Auto),
            NullBoundConfig::Named(s) => bail!("estimation.null_bound must be \"auto\" or a number, got {s:?}"),
            NullBoundConfig::Value(v) if *v >= 0.0 => Ok(NullBound::Fixed(*v)),
            NullBoundConfig::Value(v) => bail!("estimation.null_bound must be nonnegative, got {v}"),
        }
    }

    pub fn estimate_options(&self) -> Result<EstimateOptions> {
        Ok(EstimateOptions {
            alpha: self.estimation.alpha,
            null_bound: self.null_bound()?,
            ..EstimateOptions::default()
        })
    }

    /// Applies command-line overrides.
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        if let Some(n) = o.steps {
            self.horizon = n;
            self.estimation.steps = n;
        }
        if let Some(m) = &o.method {
            self.estimation.method = m.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        self.validate()
    }
}

/// Values given on the command line that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub steps: Option<usize>,
    pub method: Option<String>,
    pub seed: Option<u64>,
}
