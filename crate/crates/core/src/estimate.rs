//! Set-based state estimation: time update through the data-driven model sets,
//! then correction with sensor readings by reverse mapping (RM), implicit
//! intersection (IN) or generalized intersection (GI).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{check_dim, Error, Result};
use crate::ident::Sensor;
use crate::linalg::{block_diag, hstack, pinv, vcat, vstack, Matrix, SvdSplit, Vector};
use crate::oracle::{directions, LeafSet, OracleConfig, MEMBER_TOL};
use crate::reach::{propagate_family, reach_step_with, ReachFamily, ReachOptions};
use crate::setops::{HybridZonotope, MatrixZonotope, PolyhedralRegion, Zonotope};

/// Relative singular-value cutoff used for sensor and weight solves.
pub const SVD_TOL: f64 = 1e-10;
/// Relative threshold for the full-row-rank check on sensor matrices.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorReading {
    pub sensor: usize,
    pub y: Vector,
    pub step: usize,
}

/// `{ x : C x ∈ y − Z_v }`, truncated to `‖V₂ᵀ x‖_∞ ≤ M` along the null space of `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementZonotope {
    pub center: Vector,
    pub generators: Matrix,
}

impl MeasurementZonotope {
    pub fn to_hybrid(&self) -> HybridZonotope {
        HybridZonotope::from_zonotope(
            &Zonotope::new(self.center.clone(), self.generators.clone()).expect("shapes agree"),
        )
    }

    /// `‖C c + c_v − y‖_∞`.
    pub fn consistency_residual(&self, sensor: &Sensor, y: &Vector) -> f64 {
        (&sensor.c * &self.center + sensor.noise.center() - y).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Rm,
    In,
    Gi,
    All,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rm" => Ok(Self::Rm),
            "in" => Ok(Self::In),
            "gi" => Ok(Self::Gi),
            "all" => Ok(Self::All),
            _ => Err(Error::InvalidInput(format!("unknown method {s:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rm => "RM",
            Self::In => "IN",
            Self::Gi => "GI",
            Self::All => "ALL",
        })
    }
}

fn sensor_for<'a>(sensors: &'a [Sensor], r: &SensorReading) -> Result<&'a Sensor> {
    let s = sensors
        .get(r.sensor)
        .ok_or_else(|| Error::InvalidInput(format!("reading refers to unknown sensor {}", r.sensor)))?;
    check_dim("sensor reading", s.outputs(), r.y.len())?;
    Ok(s)
}

/// Time update: one reachability step with the output-data model sets.
pub fn time_update(
    prev: &ReachFamily,
    models_y: &[MatrixZonotope],
    regions: &[PolyhedralRegion],
    input_sets: &[HybridZonotope],
    noise: &Zonotope,
) -> Result<ReachFamily> {
    reach_step_with(prev, models_y, regions, input_sets, noise, &ReachOptions::default())
}

/// Quantities of one sensor that depend on neither the measurement nor the set
/// being corrected: `C^†`, a null-space basis `V₂`, `C^† G_v` and `G_v G_vᵀ`.
#[derive(Debug, Clone)]
pub struct PreparedSensor {
    pub sensor: Sensor,
    rank: usize,
    pinv: Matrix,
    null: Matrix,
    noise_back: Matrix,
    cov: Matrix,
}

impl PreparedSensor {
    pub fn new(sensor: &Sensor) -> Self {
        let svd = SvdSplit::new(&sensor.c, RANK_TOL);
        let pinv = svd.pinv();
        let g = sensor.noise.generators();
        Self {
            rank: svd.rank(),
            noise_back: &pinv * g,
            cov: g * g.transpose(),
            pinv,
            null: svd.null,
            sensor: sensor.clone(),
        }
    }

    pub fn prepare_all(sensors: &[Sensor]) -> Vec<Self> {
        sensors.iter().map(Self::new).collect()
    }

    /// Center `V₁ Σ⁻¹ P₁ᵀ (y − c_v)`, generators `[C^† G_v, V₂ M]`.
    pub fn reverse_map(&self, y: &Vector, m: f64) -> Result<MeasurementZonotope> {
        let s = &self.sensor;
        check_dim("measurement", s.outputs(), y.len())?;
        if !(m > 0.0) {
            return Err(Error::InvalidInput(format!("null-space bound must be positive, got {m}")));
        }
        if self.rank < s.outputs() {
            return Err(Error::RankDeficient {
                what: "sensor matrix".into(),
                rank: self.rank,
                required: s.outputs(),
            });
        }
        let n = s.c.ncols();
        Ok(MeasurementZonotope {
            center: &self.pinv * (y - s.noise.center()),
            generators: hstack(n, &[&self.noise_back, &(&self.null * m)]),
        })
    }
}

fn prepared_for<'a>(prepared: &'a [PreparedSensor], r: &SensorReading) -> Result<&'a PreparedSensor> {
    let p = prepared
        .get(r.sensor)
        .ok_or_else(|| Error::InvalidInput(format!("reading refers to unknown sensor {}", r.sensor)))?;
    check_dim("sensor reading", p.sensor.outputs(), r.y.len())?;
    Ok(p)
}

/// Center `V₁ Σ⁻¹ P₁ᵀ (y − c_v)`, generators `[C^† G_v, V₂ M]`.
pub fn reverse_map_zonotope(sensor: &Sensor, y: &Vector, m: f64) -> Result<MeasurementZonotope> {
    PreparedSensor::new(sensor).reverse_map(y, m)
}

/// Default null-space bound: `2 · max |hull coordinate| + 1`.
pub fn default_null_bound(pred: &HybridZonotope) -> Result<f64> {
    let hull = LeafSet::new(pred)?.interval_hull().ok_or(Error::EmptySet)?;
    Ok(2.0 * hull.max_abs() + 1.0)
}

/// `{ x ∈ pred : R_j x ∈ Z_j for every j }` as one generalized intersection
/// with the product of the `Z_j` under the stacked map. The result matches the
/// sequential intersections in reading order entry for entry.
fn intersect_all(pred: &HybridZonotope, parts: &[(Matrix, Zonotope)]) -> Result<HybridZonotope> {
    if parts.is_empty() {
        return Ok(pred.clone());
    }
    let n = pred.dim();
    let maps: Vec<&Matrix> = parts.iter().map(|(r, _)| r).collect();
    let centers: Vec<&Vector> = parts.iter().map(|(_, z)| z.center()).collect();
    let gens: Vec<&Matrix> = parts.iter().map(|(_, z)| z.generators()).collect();
    let product = Zonotope::new(vcat(&centers), block_diag(&gens))?;
    pred.generalized_intersection(&vstack(n, &maps), &HybridZonotope::from_zonotope(&product))
}

/// Reverse mapping: intersect with each measurement zonotope in reading order.
pub fn update_rm(
    pred: &HybridZonotope,
    readings: &[SensorReading],
    sensors: &[Sensor],
    m: f64,
) -> Result<HybridZonotope> {
    update_rm_prepared(pred, readings, &PreparedSensor::prepare_all(sensors), m)
}

/// [`update_rm`] with the sensor decompositions computed beforehand.
pub fn update_rm_prepared(
    pred: &HybridZonotope,
    readings: &[SensorReading],
    prepared: &[PreparedSensor],
    m: f64,
) -> Result<HybridZonotope> {
    let n = pred.dim();
    let parts = readings
        .iter()
        .map(|r| {
            let s = prepared_for(prepared, r)?;
            check_dim("sensor columns", n, s.sensor.c.ncols())?;
            let mz = s.reverse_map(&r.y, m)?;
            Ok((Matrix::identity(n, n), Zonotope::new(mz.center, mz.generators)?))
        })
        .collect::<Result<Vec<_>>>()?;
    intersect_all(pred, &parts)
}

/// Generalized intersection: `{ x ∈ pred : C x ∈ y − Z_v }` for every reading,
/// each adding the noise factors and one constraint block.
pub fn update_gi(pred: &HybridZonotope, readings: &[SensorReading], sensors: &[Sensor]) -> Result<HybridZonotope> {
    let parts = readings
        .iter()
        .map(|r| {
            let s = sensor_for(sensors, r)?;
            let slab = Zonotope::new(&r.y - s.noise.center(), s.noise.generators().clone())?;
            Ok((s.c.clone(), slab))
        })
        .collect::<Result<Vec<_>>>()?;
    intersect_all(pred, &parts)
}

/// Result of an implicit-intersection update.
#[derive(Debug, Clone)]
pub struct InUpdate {
    pub set: HybridZonotope,
    /// Weight `λ_j` for each reading, `n × p_j`.
    pub lambda: Vec<Matrix>,
    /// Largest entry of the weight-cost gradient at `λ`.
    pub stationarity: f64,
    /// Condition number of the normal-equation matrix.
    pub condition: f64,
}

/// Weights of the implicit intersection together with the normal matrix they solve.
struct InSolution<'a> {
    used: Vec<&'a Sensor>,
    normal: Matrix,
    lambda: Vec<Matrix>,
}

fn solve_in<'a>(
    pred: &HybridZonotope,
    readings: &[SensorReading],
    prepared: &'a [PreparedSensor],
    alpha: f64,
) -> Result<Option<InSolution<'a>>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    let n = pred.dim();
    let used: Vec<&PreparedSensor> = readings
        .iter()
        .map(|r| prepared_for(prepared, r))
        .collect::<Result<_>>()?;
    if used.is_empty() {
        return Ok(None);
    }
    for u in &used {
        check_dim("sensor columns", n, u.sensor.c.ncols())?;
    }
    let cs: Vec<&Matrix> = used.iter().map(|u| &u.sensor.c).collect();
    let c = vstack(n, &cs);
    let covs: Vec<&Matrix> = used.iter().map(|u| &u.cov).collect();
    let s = weight_gram(pred, alpha);
    let sct = &s * c.transpose();
    let normal = &c * &sct + block_diag(&covs);
    let lam_bar = sct * pinv(&normal, SVD_TOL);
    let mut lambda = Vec::with_capacity(used.len());
    let mut col = 0;
    for u in &used {
        lambda.push(lam_bar.columns(col, u.sensor.outputs()).into_owned());
        col += u.sensor.outputs();
    }
    Ok(Some(InSolution {
        used: used.iter().map(|u| &u.sensor).collect(),
        normal,
        lambda,
    }))
}

/// Weights `λ_j` (one per reading) minimizing `‖Ĝc‖_F² + α ‖Ĝb‖_F²`.
///
/// With `S = Gc Gcᵀ + α Gb Gbᵀ`, stacked `C` and `R = blkdiag(G_vj G_vjᵀ)`, the
/// cost is stationary where `λ̄ (C S Cᵀ + R) = S Cᵀ`, solved by pseudoinverse.
pub fn in_weights(
    pred: &HybridZonotope,
    readings: &[SensorReading],
    prepared: &[PreparedSensor],
    alpha: f64,
) -> Result<Vec<Matrix>> {
    Ok(solve_in(pred, readings, prepared, alpha)?.map_or_else(Vec::new, |s| s.lambda))
}

/// Implicit intersection with the weights of [`in_weights`], plus the
/// conditioning of the weight system and the stationarity residual.
pub fn update_in(
    pred: &HybridZonotope,
    readings: &[SensorReading],
    sensors: &[Sensor],
    alpha: f64,
) -> Result<InUpdate> {
    let prepared = PreparedSensor::prepare_all(sensors);
    let Some(sol) = solve_in(pred, readings, &prepared, alpha)? else {
        return Ok(InUpdate {
            set: pred.clone(),
            lambda: Vec::new(),
            stationarity: 0.0,
            condition: 1.0,
        });
    };
    let sv = sol.normal.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let set = update_in_with_weights(pred, readings, sensors, &sol.lambda)?;
    let stationarity = in_stationarity(pred, &sol.used, &sol.lambda, alpha);
    Ok(InUpdate {
        set,
        lambda: sol.lambda,
        stationarity,
        condition,
    })
}

fn weight_gram(pred: &HybridZonotope, alpha: f64) -> Matrix {
    pred.gc() * pred.gc().transpose() + pred.gb() * pred.gb().transpose() * alpha
}

/// Largest entry of `∂J/∂λ_j = −2 (I − L) S C_jᵀ + 2 λ_j G_vj G_vjᵀ` over all `j`.
fn in_stationarity(pred: &HybridZonotope, used: &[&Sensor], lambda: &[Matrix], alpha: f64) -> f64 {
    let n = pred.dim();
    let s = weight_gram(pred, alpha);
    let l = used
        .iter()
        .zip(lambda)
        .fold(Matrix::zeros(n, n), |acc, (u, lam)| acc + lam * &u.c);
    let resid = (Matrix::identity(n, n) - l) * s;
    used.iter()
        .zip(lambda)
        .map(|(u, lam)| {
            let g = &resid * u.c.transpose() * -2.0
                + lam * (u.noise.generators() * u.noise.generators().transpose()) * 2.0;
            g.amax()
        })
        .fold(0.0, f64::max)
}

/// Implicit intersection for given weights `λ_j` (one per reading).
pub fn update_in_with_weights(
    pred: &HybridZonotope,
    readings: &[SensorReading],
    sensors: &[Sensor],
    lambda: &[Matrix],
) -> Result<HybridZonotope> {
    check_dim("weight count", readings.len(), lambda.len())?;
    let n = pred.dim();
    let mut l = Matrix::zeros(n, n);
    let mut center = pred.center().clone();
    let mut noise_blocks = Vec::with_capacity(readings.len());
    for (r, lam) in readings.iter().zip(lambda) {
        let s = sensor_for(sensors, r)?;
        if lam.shape() != (n, s.outputs()) {
            return Err(Error::InvalidInput(format!(
                "weight for sensor {} has shape {:?}, expected {:?}",
                r.sensor,
                lam.shape(),
                (n, s.outputs())
            )));
        }
        l += lam * &s.c;
        center += lam * (&r.y - &s.c * pred.center() - s.noise.center());
        noise_blocks.push(-(lam * s.noise.generators()));
    }
    let shrink = Matrix::identity(n, n) - l;
    let mut gc_parts = vec![&shrink * pred.gc()];
    gc_parts.extend(noise_blocks);
    let refs: Vec<&Matrix> = gc_parts.iter().collect();
    let gc = hstack(n, &refs);
    let extra = gc.ncols() - pred.num_cont();
    let nc = pred.num_cons();
    let ac = hstack(nc, &[pred.ac(), &Matrix::zeros(nc, extra)]);
    HybridZonotope::new(gc, &shrink * pred.gb(), center, ac, pred.ab().clone(), pred.b().clone())
}

/// Support gap and mutual sample containment between two sets.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub max_gap: f64,
    pub directions: usize,
    pub samples: usize,
    /// Samples of the first set that are members of the second.
    pub a_in_b: usize,
    /// Samples of the second set that are members of the first.
    pub b_in_a: usize,
    pub within_tol: bool,
}

const REPORT_SAMPLES: usize = 50;
const REPORT_SEED: u64 = 0x51de;

/// Largest `|h(A,d) − h(B,d)|` over evenly spread directions, plus sampled
/// containment in both directions.
pub fn equivalence_report(a: &HybridZonotope, b: &HybridZonotope, n_dirs: usize, tol: f64) -> Result<EquivalenceReport> {
    check_dim("equivalence report", a.dim(), b.dim())?;
    let la = LeafSet::new(a)?;
    let lb = LeafSet::new(b)?;
    if la.is_empty() || lb.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut max_gap: f64 = 0.0;
    for d in directions(a.dim(), n_dirs) {
        let ha = la.support(&d).expect("nonempty");
        let hb = lb.support(&d).expect("nonempty");
        max_gap = max_gap.max((ha - hb).abs());
    }
    let count = |from: &LeafSet, to: &LeafSet| -> Result<usize> {
        Ok(from
            .sample(REPORT_SAMPLES, REPORT_SEED)?
            .iter()
            .filter(|x| to.contains(x, MEMBER_TOL))
            .count())
    };
    Ok(EquivalenceReport {
        max_gap,
        directions: n_dirs,
        samples: REPORT_SAMPLES,
        a_in_b: count(&la, &lb)?,
        b_in_a: count(&lb, &la)?,
        within_tol: max_gap <= tol,
    })
}

/// Null-space bound for RM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullBound {
    /// `2 · max |hull coordinate of the prediction| + 1`, recomputed per step.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub alpha: f64,
    pub null_bound: NullBound,
    /// Directions used by the method comparison in `Method::All`.
    pub directions: usize,
    pub tol: f64,
    pub oracle: OracleConfig,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            null_bound: NullBound::Auto,
            directions: 32,
            tol: 1e-4,
            oracle: OracleConfig::default(),
        }
    }
}

/// Known input and sensor readings at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamStep {
    pub u: Vector,
    pub readings: Vec<SensorReading>,
}

/// All three corrections of the same prediction.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub rm: HybridZonotope,
    pub in_set: HybridZonotope,
    pub gi: HybridZonotope,
    pub rm_gi: EquivalenceReport,
    pub rm_in: EquivalenceReport,
    pub gi_in: EquivalenceReport,
    /// Worst IN stationarity residual over the corrected pieces.
    pub stationarity: f64,
}

impl Comparison {
    pub fn max_gap(&self) -> f64 {
        self.rm_gi.max_gap.max(self.rm_in.max_gap).max(self.gi_in.max_gap)
    }
}

#[derive(Debug, Clone)]
pub struct EstimateStep {
    pub step: usize,
    pub corrected: HybridZonotope,
    pub comparison: Option<Comparison>,
}

struct Corrected {
    rm: Option<HybridZonotope>,
    in_set: Option<HybridZonotope>,
    gi: Option<HybridZonotope>,
    stationarity: f64,
}

fn correct_piece(
    pred: &HybridZonotope,
    readings: &[SensorReading],
    sensors: &[Sensor],
    method: Method,
    opts: &EstimateOptions,
) -> Result<Corrected> {
    let want = |m: Method| method == m || method == Method::All;
    let rm = if want(Method::Rm) {
        let m = match opts.null_bound {
            NullBound::Auto => default_null_bound(pred)?,
            NullBound::Fixed(m) => m,
        };
        Some(update_rm(pred, readings, sensors, m)?)
    } else {
        None
    };
    let (in_set, stationarity) = if want(Method::In) {
        let r = update_in(pred, readings, sensors, opts.alpha)?;
        (Some(r.set), r.stationarity)
    } else {
        (None, 0.0)
    };
    let gi = if want(Method::Gi) {
        Some(update_gi(pred, readings, sensors)?)
    } else {
        None
    };
    Ok(Corrected {
        rm,
        in_set,
        gi,
        stationarity,
    })
}

fn union_of(parts: Vec<HybridZonotope>, n: usize) -> Result<HybridZonotope> {
    if parts.is_empty() {
        Ok(HybridZonotope::empty(n))
    } else {
        HybridZonotope::union_all(&parts)
    }
}

/// Corrects every nonempty piece and unions the results. In `Method::All` the
/// returned chain set is the GI correction and the three are compared.
fn correct_pieces(
    pieces: &[&HybridZonotope],
    readings: &[SensorReading],
    sensors: &[Sensor],
    method: Method,
    opts: &EstimateOptions,
    n: usize,
) -> Result<(HybridZonotope, Option<Comparison>)> {
    let mut rm = Vec::new();
    let mut in_sets = Vec::new();
    let mut gi = Vec::new();
    let mut stationarity: f64 = 0.0;
    for p in pieces {
        let c = correct_piece(p, readings, sensors, method, opts)?;
        rm.extend(c.rm);
        in_sets.extend(c.in_set);
        gi.extend(c.gi);
        stationarity = stationarity.max(c.stationarity);
    }
    match method {
        Method::Rm => Ok((union_of(rm, n)?, None)),
        Method::In => Ok((union_of(in_sets, n)?, None)),
        Method::Gi => Ok((union_of(gi, n)?, None)),
        Method::All => {
            let (rm, in_set, gi) = (union_of(rm, n)?, union_of(in_sets, n)?, union_of(gi, n)?);
            let report = |a: &HybridZonotope, b: &HybridZonotope| equivalence_report(a, b, opts.directions, opts.tol);
            let cmp = match (report(&rm, &gi), report(&rm, &in_set), report(&gi, &in_set)) {
                (Ok(rm_gi), Ok(rm_in), Ok(gi_in)) => Some(Comparison {
                    rm,
                    in_set,
                    gi: gi.clone(),
                    rm_gi,
                    rm_in,
                    gi_in,
                    stationarity,
                }),
                (Err(Error::EmptySet), _, _) | (_, Err(Error::EmptySet), _) | (_, _, Err(Error::EmptySet)) => None,
                (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return Err(e),
            };
            Ok((gi, cmp))
        }
    }
}

/// Online estimation over steps `0..=n`.
///
/// Step 0 corrects `x0_set` with the readings of `stream[0]`. Each later step
/// propagates the previous corrected set with the known input `stream[k−1].u`,
/// restricts the prediction to every region, corrects each nonempty piece with
/// `stream[k].readings` and unions the corrected pieces.
pub fn estimate_online(
    x0_set: &HybridZonotope,
    stream: &[StreamStep],
    models_y: &[MatrixZonotope],
    regions: &[PolyhedralRegion],
    sensors: &[Sensor],
    noise: &Zonotope,
    method: Method,
    n: usize,
    opts: &EstimateOptions,
) -> Result<Vec<EstimateStep>> {
    if stream.len() < n + 1 {
        return Err(Error::InvalidInput(format!(
            "stream has {} steps, need {} for a horizon of {n}",
            stream.len(),
            n + 1
        )));
    }
    check_dim("model count", regions.len(), models_y.len())?;
    let dim = x0_set.dim();
    let mut out = Vec::with_capacity(n + 1);
    let (set, comparison) = correct_pieces(&[x0_set], &stream[0].readings, sensors, method, opts, dim)?;
    let mut family = ReachFamily::with_config(0, set.clone(), regions, &opts.oracle)?;
    if family.is_empty() {
        return Err(Error::InfeasibleEstimate { step: 0 });
    }
    out.push(EstimateStep {
        step: 0,
        corrected: set,
        comparison,
    });
    let reach_opts = ReachOptions {
        hull_relaxation: false,
        oracle: opts.oracle,
    };
    for k in 1..=n {
        let u = HybridZonotope::point(stream[k - 1].u.clone());
        let inputs = vec![u; regions.len()];
        let pred = propagate_family(&family, models_y, &inputs, noise, &reach_opts)?;
        let pred_family = ReachFamily::with_config(k, pred, regions, &opts.oracle)?;
        let pieces: Vec<&HybridZonotope> = pred_family
            .per_mode
            .iter()
            .zip(&pred_family.empty)
            .filter(|(_, e)| !**e)
            .map(|(p, _)| p)
            .collect();
        let (set, comparison) = correct_pieces(&pieces, &stream[k].readings, sensors, method, opts, dim)?;
        family = ReachFamily::with_config(k, set.clone(), regions, &opts.oracle)?;
        if family.is_empty() {
            return Err(Error::InfeasibleEstimate { step: k });
        }
        out.push(EstimateStep {
            step: k,
            corrected: set,
            comparison,
        });
    }
    Ok(out)
}

/// Parses `k, u1..um, j, y1..yp_j` rows (one per reading, `j` zero-based). The
/// header names the widest reading; shorter readings simply have fewer fields.
pub fn parse_measurements(text: &str) -> Result<Vec<StreamStep>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty measurement file".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.first() != Some(&"k") {
        return Err(Error::InvalidInput("measurement header must start with k".into()));
    }
    let m = names.iter().filter(|h| h.starts_with('u')).count();
    if names.get(1 + m) != Some(&"j") {
        return Err(Error::InvalidInput("measurement header must be k, u1..um, j, y1..".into()));
    }
    let mut steps: BTreeMap<usize, StreamStep> = BTreeMap::new();
    for (lineno, line) in lines {
        let bad = |what: &str| Error::InvalidInput(format!("line {}: {what}", lineno + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() < m + 3 {
            return Err(bad("too few fields"));
        }
        let k: usize = f[0].parse().map_err(|_| bad("bad step index"))?;
        let nums = |s: &[&str]| -> Result<Vec<f64>> {
            s.iter().map(|x| x.parse::<f64>().map_err(|_| bad("bad number"))).collect()
        };
        let u = Vector::from_vec(nums(&f[1..1 + m])?);
        let j: usize = f[1 + m].parse().map_err(|_| bad("bad sensor index"))?;
        let y = Vector::from_vec(nums(&f[2 + m..])?);
        let entry = steps.entry(k).or_insert_with(|| StreamStep {
            u: u.clone(),
            readings: Vec::new(),
        });
        if entry.u != u {
            return Err(bad("input differs between readings of the same step"));
        }
        entry.readings.push(SensorReading { sensor: j, y, step: k });
    }
    for (expected, k) in steps.keys().enumerate() {
        if *k != expected {
            return Err(Error::InvalidInput(format!("measurement steps must be contiguous from 0, missing {expected}")));
        }
    }
    Ok(steps.into_values().collect())
}

/// Writes a stream in the format read by [`parse_measurements`].
pub fn format_measurements(stream: &[StreamStep]) -> String {
    let m = stream.first().map_or(0, |s| s.u.len());
    let p = stream
        .iter()
        .flat_map(|s| s.readings.iter().map(|r| r.y.len()))
        .max()
        .unwrap_or(0);
    let mut header = vec!["k".to_string()];
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.push("j".into());
    header.extend((1..=p).map(|i| format!("y{i}")));
    let mut out = header.join(",");
    out.push('\n');
    for (k, s) in stream.iter().enumerate() {
        for r in &s.readings {
            let _ = write!(out, "{k}");
            for v in s.u.iter() {
                let _ = write!(out, ",{v:?}");
            }
            let _ = write!(out, ",{}", r.sensor);
            for v in r.y.iter() {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
    }
    out
}

/// Stacks the readings of one step into a single output vector, in sensor order.
pub fn stacked_readings(readings: &[SensorReading]) -> Vector {
    let mut sorted: Vec<&SensorReading> = readings.iter().collect();
    sorted.sort_by_key(|r| r.sensor);
    let parts: Vec<&Vector> = sorted.iter().map(|r| &r.y).collect();
    vcat(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, interval_hull};

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    fn row(r: &[f64]) -> Matrix {
        Matrix::from_row_slice(1, r.len(), r)
    }

    fn unit_box() -> HybridZonotope {
        HybridZonotope::from_zonotope(&Zonotope::new(Vector::zeros(2), Matrix::identity(2, 2)).unwrap())
    }

    fn sensor(c: Matrix, noise: f64) -> Sensor {
        let p = c.nrows();
        Sensor::new(c, Zonotope::new(Vector::zeros(p), Matrix::identity(p, p) * noise).unwrap()).unwrap()
    }

    fn reading(j: usize, y: &[f64]) -> SensorReading {
        SensorReading {
            sensor: j,
            y: v(y),
            step: 0,
        }
    }

    #[test]
    fn batched_updates_match_sequential_intersections() {
        let pred = unit_box()
            .union(&HybridZonotope::from_zonotope(
                &Zonotope::new(v(&[1.5, 0.5]), Matrix::identity(2, 2) * 0.5).unwrap(),
            ))
            .unwrap();
        let sensors = vec![
            sensor(row(&[1.0, 0.4]), 0.1),
            sensor(Matrix::from_row_slice(2, 2, &[-0.8, 0.2, 0.0, 0.7]), 0.05),
        ];
        let readings = vec![reading(0, &[0.7]), reading(1, &[-0.4, 0.3])];
        let mut seq = pred.clone();
        for r in &readings {
            let s = &sensors[r.sensor];
            let slab = Zonotope::new(&r.y - s.noise.center(), s.noise.generators().clone()).unwrap();
            seq = seq.generalized_intersection(&s.c, &HybridZonotope::from_zonotope(&slab)).unwrap();
        }
        assert_eq!(update_gi(&pred, &readings, &sensors).unwrap(), seq);
        let mut seq = pred.clone();
        for r in &readings {
            let mz = reverse_map_zonotope(&sensors[r.sensor], &r.y, 4.0).unwrap();
            seq = seq.generalized_intersection(&Matrix::identity(2, 2), &mz.to_hybrid()).unwrap();
        }
        assert_eq!(update_rm(&pred, &readings, &sensors, 4.0).unwrap(), seq);
        assert_eq!(update_gi(&pred, &[], &sensors).unwrap(), pred);
    }

    fn close_hull(z: &HybridZonotope, lo: &[f64], hi: &[f64]) {
        let h = interval_hull(z).unwrap().unwrap();
        assert!((&h.lower - v(lo)).amax() < 1e-9, "{h:?}");
        assert!((&h.upper - v(hi)).amax() < 1e-9, "{h:?}");
    }

    #[test]
    fn reverse_map_examples() {
        let mz = reverse_map_zonotope(&sensor(Matrix::identity(2, 2), 0.0), &v(&[1.0, 2.0]), 10.0).unwrap();
        assert!((mz.center.clone() - v(&[1.0, 2.0])).amax() < 1e-12);
        assert!(mz.generators.iter().all(|g| g.abs() < 1e-12));

        let s = sensor(row(&[1.0, 0.0]), 0.0);
        let mz = reverse_map_zonotope(&s, &v(&[3.0]), 10.0).unwrap();
        close_hull(&mz.to_hybrid(), &[3.0, -10.0], &[3.0, 10.0]);
        assert!(mz.consistency_residual(&s, &v(&[3.0])) < 1e-12);

        let mz = reverse_map_zonotope(&sensor(row(&[1.0, 0.0]), 0.5), &v(&[3.0]), 10.0).unwrap();
        close_hull(&mz.to_hybrid(), &[2.5, -10.0], &[3.5, 10.0]);

        assert!(reverse_map_zonotope(&s, &v(&[3.0]), 0.0).is_err());
        let rank_deficient = sensor(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]), 0.0);
        assert!(matches!(
            reverse_map_zonotope(&rank_deficient, &v(&[1.0, 2.0]), 1.0),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn rm_and_gi_slab_examples() {
        let sensors = [sensor(row(&[1.0, 0.0]), 0.1)];
        let readings = [reading(0, &[0.5])];
        let rm = update_rm(&unit_box(), &readings, &sensors, 10.0).unwrap();
        close_hull(&rm, &[0.4, -1.0], &[0.6, 1.0]);
        let gi = update_gi(&unit_box(), &readings, &sensors).unwrap();
        close_hull(&gi, &[0.4, -1.0], &[0.6, 1.0]);
        let rep = equivalence_report(&rm, &gi, 32, 1e-9).unwrap();
        assert!(rep.max_gap <= 1e-9, "{rep:?}");
        assert_eq!(rep.a_in_b, rep.samples);
        assert_eq!(rep.b_in_a, rep.samples);
    }

    #[test]
    fn exact_observation_collapses_to_point() {
        let sensors = [sensor(Matrix::identity(2, 2), 0.0)];
        let readings = [reading(0, &[0.3, -0.2])];
        let rm = update_rm(&unit_box(), &readings, &sensors, 10.0).unwrap();
        close_hull(&rm, &[0.3, -0.2], &[0.3, -0.2]);
        let gi = update_gi(&unit_box(), &readings, &sensors).unwrap();
        close_hull(&gi, &[0.3, -0.2], &[0.3, -0.2]);
        let inn = update_in(&unit_box(), &readings, &sensors, 1.0).unwrap();
        assert!((&inn.lambda[0] - Matrix::identity(2, 2)).amax() < 1e-9);
        close_hull(&inn.set, &[0.3, -0.2], &[0.3, -0.2]);
    }

    #[test]
    fn gi_discards_inconsistent_branch() {
        let left = HybridZonotope::from_zonotope(&Zonotope::new(v(&[-2.0, 0.0]), Matrix::identity(2, 2)).unwrap());
        let right = HybridZonotope::from_zonotope(&Zonotope::new(v(&[2.0, 0.0]), Matrix::identity(2, 2)).unwrap());
        let both = left.union(&right).unwrap();
        let gi = update_gi(&both, &[reading(0, &[2.5])], &[sensor(row(&[1.0, 0.0]), 0.1)]).unwrap();
        close_hull(&gi, &[2.4, -1.0], &[2.6, 1.0]);
        assert_eq!(LeafSet::new(&gi).unwrap().leaves().len(), 1);
    }

    #[test]
    fn in_weight_edge_cases() {
        let zero = [sensor(Matrix::zeros(1, 2), 0.1)];
        let r = update_in(&unit_box(), &[reading(0, &[0.7])], &zero, 1.0).unwrap();
        assert!(r.lambda[0].amax() < 1e-12);
        let rep = equivalence_report(&r.set, &unit_box(), 16, 1e-9).unwrap();
        assert!(rep.max_gap < 1e-9);

        let sensors = [sensor(row(&[1.0, 0.0]), 0.1)];
        let same = update_in_with_weights(&unit_box(), &[reading(0, &[0.5])], &sensors, &[Matrix::zeros(2, 1)]).unwrap();
        let rep = equivalence_report(&same, &unit_box(), 16, 1e-12).unwrap();
        assert!(rep.max_gap < 1e-12);
        let rm = update_rm(&unit_box(), &[reading(0, &[0.5])], &sensors, 10.0).unwrap();
        let rep = equivalence_report(&same, &rm, 16, 1e-4).unwrap();
        assert!(rep.max_gap > 0.1 && !rep.within_tol);
    }

    #[test]
    fn in_weights_are_stationary_and_sound() {
        let sensors = [sensor(row(&[1.0, 0.0]), 0.1), sensor(row(&[0.3, 1.0]), 0.2)];
        let readings = [reading(0, &[0.5]), reading(1, &[-0.1])];
        let r = update_in(&unit_box(), &readings, &sensors, 1.0).unwrap();
        assert!(r.stationarity < 1e-8, "{}", r.stationarity);
        // Any perturbation of the weights increases the Frobenius cost.
        let cost = |lam: &[Matrix]| {
            let z = update_in_with_weights(&unit_box(), &readings, &sensors, lam).unwrap();
            z.gc().norm_squared() + z.gb().norm_squared()
        };
        let best = cost(&r.lambda);
        for k in 0..4 {
            let mut lam = r.lambda.clone();
            lam[k % 2][(k / 2, 0)] += 1e-3;
            assert!(cost(&lam) > best);
        }
        // The exact intersection lies inside the IN set.
        let gi = update_gi(&unit_box(), &readings, &sensors).unwrap();
        for x in oracle::sample(&gi, 100, 3).unwrap() {
            assert!(oracle::membership(&r.set, &x, MEMBER_TOL).unwrap());
        }
    }

    #[test]
    fn in_is_a_strict_superset_under_noise() {
        // The weighted correction cannot reproduce the slab exactly: for this
        // single-sensor case its x₁ extent is wider than [0.4, 0.6].
        let sensors = [sensor(row(&[1.0, 0.0]), 0.1)];
        let r = update_in(&unit_box(), &[reading(0, &[0.5])], &sensors, 1.0).unwrap();
        let h = interval_hull(&r.set).unwrap().unwrap();
        assert!(h.lower[0] < 0.4 - 1e-3 && h.upper[0] > 0.6 + 1e-3);
    }

    #[test]
    fn online_estimation_tracks_a_noiseless_system() {
        let a = Matrix::from_row_slice(2, 2, &[0.9, -0.2, 0.2, 0.9]);
        let b = Matrix::from_row_slice(2, 1, &[0.1, 0.0]);
        let model = MatrixZonotope::point(hstack(2, &[&a, &b]));
        let sensors = [sensor(Matrix::identity(2, 2), 0.0)];
        let mut x = v(&[1.0, -1.0]);
        let mut stream = Vec::new();
        let mut truth = Vec::new();
        for k in 0..6 {
            let u = v(&[(k as f64).sin()]);
            stream.push(StreamStep {
                u: u.clone(),
                readings: vec![SensorReading { sensor: 0, y: x.clone(), step: k }],
            });
            truth.push(x.clone());
            x = &a * &x + &b * &u;
        }
        let x0 = HybridZonotope::from_zonotope(&Zonotope::new(Vector::zeros(2), Matrix::identity(2, 2) * 5.0).unwrap());
        let regions = [PolyhedralRegion::universe(2)];
        for method in [Method::Rm, Method::In, Method::Gi, Method::All] {
            let steps = estimate_online(
                &x0,
                &stream,
                &[model.clone()],
                &regions,
                &sensors,
                &Zonotope::point(Vector::zeros(2)),
                method,
                5,
                &EstimateOptions::default(),
            )
            .unwrap();
            assert_eq!(steps.len(), 6);
            for (s, t) in steps.iter().zip(&truth) {
                let h = interval_hull(&s.corrected).unwrap().unwrap();
                assert!((h.lower - t).amax() < 1e-8 && (h.upper - t).amax() < 1e-8, "{method}");
                assert_eq!(s.comparison.is_some(), method == Method::All);
            }
        }
    }

    #[test]
    fn inconsistent_data_reports_the_step() {
        let model = MatrixZonotope::point(Matrix::from_row_slice(1, 2, &[1.0, 0.0]));
        let sensors = [sensor(Matrix::identity(1, 1), 0.01)];
        let stream = vec![
            StreamStep {
                u: v(&[0.0]),
                readings: vec![reading(0, &[0.0])],
            },
            StreamStep {
                u: v(&[0.0]),
                readings: vec![reading(0, &[5.0])],
            },
        ];
        let x0 = HybridZonotope::from_zonotope(&Zonotope::new(v(&[0.0]), Matrix::identity(1, 1)).unwrap());
        let err = estimate_online(
            &x0,
            &stream,
            &[model],
            &[PolyhedralRegion::universe(1)],
            &sensors,
            &Zonotope::point(v(&[0.0])),
            Method::Gi,
            1,
            &EstimateOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, Error::InfeasibleEstimate { step: 1 });
    }

    #[test]
    fn measurement_csv_round_trip() {
        let stream = vec![
            StreamStep {
                u: v(&[0.5]),
                readings: vec![reading(0, &[1.0]), reading(2, &[2.0, 3.0])],
            },
            StreamStep {
                u: v(&[-0.5]),
                readings: vec![SensorReading { sensor: 1, y: v(&[4.0]), step: 1 }],
            },
        ];
        let text = format_measurements(&stream);
        assert!(text.starts_with("k,u1,j,y1,y2\n"));
        assert_eq!(parse_measurements(&text).unwrap(), stream);
        assert_eq!(stacked_readings(&stream[0].readings), v(&[1.0, 2.0, 3.0]));
        assert!(parse_measurements("k,u1,j,y1\n1,0,0,1\n").is_err());
        assert!("xx".parse::<Method>().is_err());
        assert_eq!("GI".parse::<Method>().unwrap(), Method::Gi);
    }
}
