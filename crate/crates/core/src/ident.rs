//! Data-driven model sets for piecewise affine systems.
//!
//! Recorded transitions are split by region, and each mode's data yields a
//! matrix zonotope `M = (X₊ − M_w) [X₋; U₋]^†` of all `[A B]` consistent with
//! the data under bounded process noise.

use std::fmt::Write as _;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{block_diag, hstack, pinv, rank, vcat, vstack, Matrix, Vector};
use crate::setops::{MatrixZonotope, PolyhedralRegion, Zonotope};

/// Relative singular-value cutoff for pseudoinverses of data matrices.
pub const PINV_TOL: f64 = 1e-10;
/// Relative singular-value threshold for the excitation rank check.
pub const RANK_TOL: f64 = 1e-8;
/// Tolerance on guard membership.
pub const GUARD_TOL: f64 = 1e-9;

/// Affine dynamics `x⁺ = A x + B u` of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub a: Matrix,
    pub b: Matrix,
}

impl Mode {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        check_dim("mode A columns", a.nrows(), a.ncols())?;
        check_dim("mode B rows", a.nrows(), b.nrows())?;
        Ok(Self { a, b })
    }

    /// `[A B]`.
    pub fn stacked(&self) -> Matrix {
        hstack(self.a.nrows(), &[&self.a, &self.b])
    }

    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }
}

/// Sensor `y = C x + v`, `v ∈ noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub c: Matrix,
    pub noise: Zonotope,
}

impl Sensor {
    pub fn new(c: Matrix, noise: Zonotope) -> Result<Self> {
        check_dim("sensor noise", c.nrows(), noise.dim())?;
        Ok(Self { c, noise })
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwaSystemSpec {
    /// Known dynamics, only needed for model-based baselines and simulation.
    pub modes: Option<Vec<Mode>>,
    pub regions: Vec<PolyhedralRegion>,
    pub noise_w: Zonotope,
    pub sensors: Vec<Sensor>,
}

impl PwaSystemSpec {
    pub fn new(
        modes: Option<Vec<Mode>>,
        regions: Vec<PolyhedralRegion>,
        noise_w: Zonotope,
        sensors: Vec<Sensor>,
    ) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidInput("a PWA system needs at least one region".into()));
        }
        let n = regions[0].dim();
        for r in &regions {
            check_dim("region dimension", n, r.dim())?;
        }
        check_dim("process noise", n, noise_w.dim())?;
        if let Some(modes) = &modes {
            check_dim("mode count", regions.len(), modes.len())?;
            let m = modes[0].b.ncols();
            for md in modes {
                check_dim("mode state dimension", n, md.a.nrows())?;
                check_dim("mode input dimension", m, md.b.ncols())?;
            }
        }
        for s in &sensors {
            check_dim("sensor state dimension", n, s.c.ncols())?;
        }
        Ok(Self {
            modes,
            regions,
            noise_w,
            sensors,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.regions[0].dim()
    }

    pub fn num_modes(&self) -> usize {
        self.regions.len()
    }

    /// Active mode at `x`: the lowest-index region containing it.
    pub fn mode_at(&self, x: &Vector) -> Option<usize> {
        region_of(x, &self.regions)
    }

    /// All sensors stacked: `C = [C¹; …; C^q]`, noise `⊕` block-diagonal.
    pub fn stacked_sensor(&self) -> Result<Sensor> {
        stack_sensors(&self.sensors)
    }
}

/// Stacks sensors into one: `C = [C¹; …; C^q]` with block-diagonal noise.
pub fn stack_sensors(sensors: &[Sensor]) -> Result<Sensor> {
    if sensors.is_empty() {
        return Err(Error::InvalidInput("no sensors".into()));
    }
    let n = sensors[0].c.ncols();
    let cs: Vec<&Matrix> = sensors.iter().map(|s| &s.c).collect();
    let centers: Vec<&Vector> = sensors.iter().map(|s| s.noise.center()).collect();
    let gens: Vec<&Matrix> = sensors.iter().map(|s| s.noise.generators()).collect();
    Sensor::new(vstack(n, &cs), Zonotope::new(vcat(&centers), block_diag(&gens))?)
}

/// Lowest index of a region containing `x`.
pub fn region_of(x: &Vector, regions: &[PolyhedralRegion]) -> Option<usize> {
    regions.iter().position(|r| r.contains(x, GUARD_TOL))
}

/// One recorded transition `x(k), u(k) → x(k+1)` with optional stacked outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub x: Vector,
    pub u: Vector,
    pub x_next: Vector,
    pub y: Option<Vector>,
    pub y_next: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDataset {
    pub mode_index: usize,
    pub x_plus: Matrix,
    pub x_minus: Matrix,
    pub u_minus: Matrix,
    pub y_plus: Option<Matrix>,
    pub y_minus: Option<Matrix>,
}

impl ModeDataset {
    pub fn new(mode_index: usize, x_plus: Matrix, x_minus: Matrix, u_minus: Matrix) -> Result<Self> {
        check_dim("X₊ rows", x_minus.nrows(), x_plus.nrows())?;
        check_dim("X₊ columns", x_minus.ncols(), x_plus.ncols())?;
        check_dim("U₋ columns", x_minus.ncols(), u_minus.ncols())?;
        Ok(Self {
            mode_index,
            x_plus,
            x_minus,
            u_minus,
            y_plus: None,
            y_minus: None,
        })
    }

    pub fn with_outputs(mut self, y_plus: Matrix, y_minus: Matrix) -> Result<Self> {
        check_dim("Y₊ columns", self.len(), y_plus.ncols())?;
        check_dim("Y₋ columns", self.len(), y_minus.ncols())?;
        check_dim("Y₋ rows", y_plus.nrows(), y_minus.nrows())?;
        self.y_plus = Some(y_plus);
        self.y_minus = Some(y_minus);
        Ok(self)
    }

    /// Number of transitions `T_i`.
    pub fn len(&self) -> usize {
        self.x_minus.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `D = [X₋; U₋]`.
    pub fn data_matrix(&self) -> Matrix {
        vstack(self.len(), &[&self.x_minus, &self.u_minus])
    }
}

fn columns(vs: &[&Vector], rows: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, vs.len());
    for (j, v) in vs.iter().enumerate() {
        m.column_mut(j).copy_from(v);
    }
    m
}

/// Splits transitions by the region of `x(k)`, ties going to the lowest index.
/// Every mode must receive at least one transition.
pub fn partition_trajectories(raw: &[Transition], regions: &[PolyhedralRegion]) -> Result<Vec<ModeDataset>> {
    let first = raw
        .first()
        .ok_or_else(|| Error::InvalidInput("no transitions".into()))?;
    let (n, m) = (first.x.len(), first.u.len());
    let mut buckets: Vec<Vec<&Transition>> = vec![Vec::new(); regions.len()];
    for (idx, t) in raw.iter().enumerate() {
        check_dim("transition state", n, t.x.len())?;
        check_dim("transition successor", n, t.x_next.len())?;
        check_dim("transition input", m, t.u.len())?;
        let mode = region_of(&t.x, regions).ok_or(Error::NoRegion { index: idx })?;
        buckets[mode].push(t);
    }
    let with_outputs = raw.iter().all(|t| t.y.is_some() && t.y_next.is_some());
    buckets
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if b.is_empty() {
                return Err(Error::EmptyMode { mode: i });
            }
            let xm: Vec<&Vector> = b.iter().map(|t| &t.x).collect();
            let xp: Vec<&Vector> = b.iter().map(|t| &t.x_next).collect();
            let um: Vec<&Vector> = b.iter().map(|t| &t.u).collect();
            let d = ModeDataset::new(i, columns(&xp, n), columns(&xm, n), columns(&um, m))?;
            if !with_outputs {
                return Ok(d);
            }
            let p = b[0].y.as_ref().map_or(0, |y| y.len());
            let ym: Vec<&Vector> = b.iter().filter_map(|t| t.y.as_ref()).collect();
            let yp: Vec<&Vector> = b.iter().filter_map(|t| t.y_next.as_ref()).collect();
            d.with_outputs(columns(&yp, p), columns(&ym, p))
        })
        .collect()
}

/// Lifts a vector noise zonotope to the matrix zonotope of `T` noise columns:
/// one generator per (noise generator, time slot).
pub fn noise_matrix_zonotope(noise: &Zonotope, horizon: usize) -> MatrixZonotope {
    let n = noise.dim();
    let mut center = Matrix::zeros(n, horizon);
    for t in 0..horizon {
        center.column_mut(t).copy_from(noise.center());
    }
    let mut gens = Vec::with_capacity(noise.num_generators() * horizon);
    for g in noise.generators().column_iter() {
        for t in 0..horizon {
            let mut m = Matrix::zeros(n, horizon);
            m.column_mut(t).copy_from(&g);
            gens.push(m);
        }
    }
    MatrixZonotope::new(center, gens).expect("generator shapes match the center")
}

/// `M_Σ = (X₊ − M_w) D^†` with `D = [X₋; U₋]`, requiring `D` of full row rank.
pub fn build_model_set(d: &ModeDataset, mw: &MatrixZonotope) -> Result<MatrixZonotope> {
    let data = d.data_matrix();
    let required = data.nrows();
    let r = rank(&data, RANK_TOL);
    if r < required {
        return Err(Error::RankDeficient {
            what: format!("data matrix of mode {}", d.mode_index),
            rank: r,
            required,
        });
    }
    mw.subtract_from(&d.x_plus)?.mul_right(&pinv(&data, PINV_TOL))
}

/// Model set from output data. States are reconstructed as `X̂ = C^†(Y − c_v)`
/// with all sensors stacked in `C`, which leaves the reconstruction error
/// `E ∈ ⟨0, C^† G_v⟩` per column. Then `X̂₊ = A X̂₋ + B U₋ + W + E₊ − A E₋`,
/// and `A E₋` is bounded by a box of radius `a_bound · max_i Σ_k |C^† G_v|_{ik}`
/// for any `‖A‖_∞ ≤ a_bound`.
pub fn build_model_set_from_outputs(
    d: &ModeDataset,
    sensors: &[Sensor],
    noise_w: &Zonotope,
    a_bound: f64,
) -> Result<MatrixZonotope> {
    if !(a_bound >= 0.0) {
        return Err(Error::InvalidInput(format!("a_bound must be nonnegative, got {a_bound}")));
    }
    let (y_plus, y_minus) = match (&d.y_plus, &d.y_minus) {
        (Some(p), Some(m)) => (p, m),
        _ => return Err(Error::InvalidInput(format!("mode {} has no output data", d.mode_index))),
    };
    let s = stack_sensors(sensors)?;
    let n = s.c.ncols();
    check_dim("process noise", n, noise_w.dim())?;
    check_dim("stacked outputs", s.c.nrows(), y_plus.nrows())?;
    let r = rank(&s.c, RANK_TOL);
    if r < n {
        return Err(Error::RankDeficient {
            what: "stacked sensor matrix".into(),
            rank: r,
            required: n,
        });
    }
    let cp = pinv(&s.c, PINV_TOL);
    let reconstruct = |y: &Matrix| {
        let mut shifted = y.clone();
        for mut col in shifted.column_iter_mut() {
            col -= s.noise.center();
        }
        &cp * shifted
    };
    let x_hat = ModeDataset::new(d.mode_index, reconstruct(y_plus), reconstruct(y_minus), d.u_minus.clone())?;

    let e = &cp * s.noise.generators();
    let r_e = e
        .row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut parts: Vec<Matrix> = vec![noise_w.generators().clone(), e];
    if a_bound * r_e > 0.0 {
        parts.push(Matrix::identity(n, n) * (a_bound * r_e));
    }
    let refs: Vec<&Matrix> = parts.iter().collect();
    let combined = Zonotope::new(noise_w.center().clone(), hstack(n, &refs))?;
    build_model_set(&x_hat, &noise_matrix_zonotope(&combined, d.len()))
}

/// One time step of a recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub k: usize,
    pub x: Vector,
    pub u: Vector,
    pub y: Option<Vector>,
}

/// Consecutive rows within one episode.
pub type Episode = Vec<TrajectoryRow>;

/// Transitions formed within each episode.
pub fn transitions(episodes: &[Episode]) -> Vec<Transition> {
    episodes
        .iter()
        .flat_map(|ep| {
            ep.windows(2).map(|w| Transition {
                x: w[0].x.clone(),
                u: w[0].u.clone(),
                x_next: w[1].x.clone(),
                y: w[0].y.clone(),
                y_next: w[1].y.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    K,
    X(usize),
    U(usize),
    Y(usize),
    /// Region tag written by simulators; not needed to rebuild transitions.
    Tag,
}

fn parse_header(line: &str) -> Result<Vec<Column>> {
    line.split(',')
        .map(|h| {
            let h = h.trim();
            let idx = |rest: &str| {
                rest.parse::<usize>()
                    .ok()
                    .filter(|&i| i >= 1)
                    .map(|i| i - 1)
                    .ok_or_else(|| Error::InvalidInput(format!("bad column name {h:?}")))
            };
            match h.chars().next() {
                Some('k') if h == "k" => Ok(Column::K),
                Some('m') if h == "mode" => Ok(Column::Tag),
                Some('x') => idx(&h[1..]).map(Column::X),
                Some('u') => idx(&h[1..]).map(Column::U),
                Some('y') => idx(&h[1..]).map(Column::Y),
                _ => Err(Error::InvalidInput(format!("bad column name {h:?}"))),
            }
        })
        .collect()
}

/// Parses `k, x1..xn, u1..um[, y1..yp][, mode]` rows; blank lines separate
/// episodes. A `mode` column is accepted and ignored.
pub fn parse_trajectories(text: &str) -> Result<Vec<Episode>> {
    let mut lines = text.lines();
    let header = lines
        .by_ref()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::InvalidInput("empty trajectory file".into()))?;
    let cols = parse_header(header)?;
    let count = |f: fn(&Column) -> bool| cols.iter().filter(|c| f(c)).count();
    let (n, m, p) = (
        count(|c| matches!(c, Column::X(_))),
        count(|c| matches!(c, Column::U(_))),
        count(|c| matches!(c, Column::Y(_))),
    );
    let mut episodes = Vec::new();
    let mut current: Episode = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                episodes.push(std::mem::take(&mut current));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::InvalidInput(format!(
                "line {}: expected {} fields, found {}",
                lineno + 2,
                cols.len(),
                fields.len()
            )));
        }
        let mut row = TrajectoryRow {
            k: 0,
            x: Vector::zeros(n),
            u: Vector::zeros(m),
            y: (p > 0).then(|| Vector::zeros(p)),
        };
        for (col, f) in cols.iter().zip(&fields) {
            let bad = || Error::InvalidInput(format!("line {}: bad number {f:?}", lineno + 2));
            match *col {
                Column::K => row.k = f.parse().map_err(|_| bad())?,
                Column::Tag => {}
                Column::X(i) if i < n => row.x[i] = f.parse().map_err(|_| bad())?,
                Column::U(i) if i < m => row.u[i] = f.parse().map_err(|_| bad())?,
                Column::Y(i) if i < p => {
                    if let Some(y) = row.y.as_mut() {
                        y[i] = f.parse().map_err(|_| bad())?;
                    }
                }
                _ => return Err(Error::InvalidInput(format!("column index out of range in {header:?}"))),
            }
        }
        current.push(row);
    }
    if !current.is_empty() {
        episodes.push(current);
    }
    Ok(episodes)
}

/// Writes episodes in the format read by [`parse_trajectories`].
pub fn format_trajectories(episodes: &[Episode]) -> String {
    let mut out = String::new();
    let Some(first) = episodes.iter().find_map(|e| e.first()) else {
        return out;
    };
    let mut header = vec!["k".to_string()];
    header.extend((1..=first.x.len()).map(|i| format!("x{i}")));
    header.extend((1..=first.u.len()).map(|i| format!("u{i}")));
    if let Some(y) = &first.y {
        header.extend((1..=y.len()).map(|i| format!("y{i}")));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (e, ep) in episodes.iter().enumerate() {
        if e > 0 {
            out.push('\n');
        }
        for row in ep {
            let _ = write!(out, "{}", row.k);
            let ys = row.y.iter().flat_map(|y| y.iter());
            for v in row.x.iter().chain(row.u.iter()).chain(ys) {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::matrix_zonotope_contains;

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    fn row(r: &[f64]) -> Matrix {
        Matrix::from_row_slice(1, r.len(), r)
    }

    fn split_at_zero() -> Vec<PolyhedralRegion> {
        vec![
            PolyhedralRegion::new(row(&[1.0]), v(&[0.0])).unwrap(),
            PolyhedralRegion::new(row(&[-1.0]), v(&[0.0])).unwrap(),
        ]
    }

    fn tr(x: f64, u: f64, xn: f64) -> Transition {
        Transition {
            x: v(&[x]),
            u: v(&[u]),
            x_next: v(&[xn]),
            y: None,
            y_next: None,
        }
    }

    #[test]
    fn partition_splits_by_region() {
        let ds = partition_trajectories(&[tr(-0.5, 0.0, 0.0), tr(0.5, 0.0, 0.0)], &split_at_zero()).unwrap();
        assert_eq!(ds[0].x_minus, row(&[-0.5]));
        assert_eq!(ds[1].x_minus, row(&[0.5]));
    }

    #[test]
    fn boundary_goes_to_lowest_region() {
        let ds = partition_trajectories(&[tr(0.0, 0.0, 0.0), tr(1.0, 0.0, 0.0)], &split_at_zero()).unwrap();
        assert_eq!(ds[0].x_minus, row(&[0.0]));
        assert_eq!(ds[1].len(), 1);
    }

    #[test]
    fn partition_errors() {
        assert_eq!(
            partition_trajectories(&[tr(1.0, 0.0, 0.0)], &split_at_zero()),
            Err(Error::EmptyMode { mode: 0 })
        );
        let only_left = vec![PolyhedralRegion::new(row(&[1.0]), v(&[0.0])).unwrap()];
        assert_eq!(
            partition_trajectories(&[tr(-1.0, 0.0, 0.0), tr(1.0, 0.0, 0.0)], &only_left),
            Err(Error::NoRegion { index: 1 })
        );
    }

    #[test]
    fn noise_lifting() {
        let z = noise_matrix_zonotope(&Zonotope::point(v(&[0.0])), 3);
        assert_eq!(z.num_generators(), 0);
        assert_eq!(z.center(), &Matrix::zeros(1, 3));

        let z = noise_matrix_zonotope(&Zonotope::new(v(&[0.0]), row(&[0.1])).unwrap(), 2);
        assert_eq!(z.generators(), &[row(&[0.1, 0.0]), row(&[0.0, 0.1])]);
        assert!(matrix_zonotope_contains(&z, &row(&[0.05, -0.1]), 1e-12).unwrap());
        assert!(!matrix_zonotope_contains(&z, &row(&[0.05, -0.2]), 1e-12).unwrap());
    }

    #[test]
    fn scalar_model_recovery() {
        let d = ModeDataset::new(0, row(&[1.5, 0.75]), row(&[1.0, 1.5]), row(&[1.0, 0.0])).unwrap();
        let mw = noise_matrix_zonotope(&Zonotope::point(v(&[0.0])), 2);
        let m = build_model_set(&d, &mw).unwrap();
        assert!((m.center() - row(&[0.5, 1.0])).amax() < 1e-12);
        assert_eq!(m.num_generators(), 0);
    }

    #[test]
    fn identity_recovery() {
        let xm = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 1.0]);
        let um = Matrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0]);
        let d = ModeDataset::new(0, xm.clone(), xm, um).unwrap();
        let m = build_model_set(&d, &noise_matrix_zonotope(&Zonotope::point(v(&[0.0, 0.0])), 3)).unwrap();
        let expect = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!((m.center() - expect).amax() < 1e-12);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let d = ModeDataset::new(0, row(&[1.0, 2.0]), row(&[1.0, 2.0]), row(&[2.0, 4.0])).unwrap();
        let err = build_model_set(&d, &noise_matrix_zonotope(&Zonotope::point(v(&[0.0])), 2)).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { rank: 1, required: 2, .. }));
    }

    fn with_outputs(d: ModeDataset, c: f64) -> ModeDataset {
        let yp = &d.x_plus * c;
        let ym = &d.x_minus * c;
        d.with_outputs(yp, ym).unwrap()
    }

    #[test]
    fn output_model_set_matches_state_model_set_without_noise() {
        let d = ModeDataset::new(0, row(&[1.5, 0.75]), row(&[1.0, 1.5]), row(&[1.0, 0.0])).unwrap();
        let w = Zonotope::point(v(&[0.0]));
        let direct = build_model_set(&d, &noise_matrix_zonotope(&w, 2)).unwrap();
        for c in [1.0, 2.0] {
            let s = Sensor::new(Matrix::from_element(1, 1, c), Zonotope::point(v(&[0.0]))).unwrap();
            let m = build_model_set_from_outputs(&with_outputs(d.clone(), c), &[s], &w, 1.0).unwrap();
            assert!((m.center() - direct.center()).amax() < 1e-12);
            assert_eq!(m.num_generators(), 0);
        }
    }

    #[test]
    fn output_model_set_contains_truth_under_measurement_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (a, b) = (0.5, 1.0);
        let noise = Zonotope::new(v(&[0.0]), row(&[0.01])).unwrap();
        let sensor = Sensor::new(Matrix::identity(1, 1), noise).unwrap();
        let w = Zonotope::point(v(&[0.0]));
        for _ in 0..20 {
            let t = 8;
            let mut xs = vec![rng.gen_range(-1.0..1.0)];
            let us: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for k in 0..t {
                xs.push(a * xs[k] + b * us[k]);
            }
            let ys: Vec<f64> = xs.iter().map(|x| x + rng.gen_range(-0.01..=0.01)).collect();
            let d = ModeDataset::new(0, row(&xs[1..]), row(&xs[..t]), row(&us))
                .unwrap()
                .with_outputs(row(&ys[1..]), row(&ys[..t]))
                .unwrap();
            let m = build_model_set_from_outputs(&d, &[sensor.clone()], &w, 1.0).unwrap();
            assert!((m.center() - row(&[a, b])).amax() < 0.05);
            assert!(matrix_zonotope_contains(&m, &row(&[a, b]), 1e-9).unwrap());
        }
    }

    #[test]
    fn output_model_set_needs_observability() {
        let d = with_outputs(
            ModeDataset::new(0, Matrix::zeros(2, 3), Matrix::identity(2, 3), row(&[0.0, 0.0, 1.0])).unwrap(),
            1.0,
        );
        let d = ModeDataset {
            y_plus: Some(Matrix::zeros(1, 3)),
            y_minus: Some(Matrix::zeros(1, 3)),
            ..d
        };
        let s = Sensor::new(row(&[1.0, 0.0]), Zonotope::point(v(&[0.0]))).unwrap();
        let err = build_model_set_from_outputs(&d, &[s], &Zonotope::point(v(&[0.0, 0.0])), 1.0).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { rank: 1, required: 2, .. }));
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let text = "k,x1,x2,u1\n0,1.0,2.0,0.5\n1,1.5,2.5,-0.5\n\n0,0.0,0.0,1.0\n1,0.1,0.2,0.0\n2,0.3,0.4,0.0\n";
        let eps = parse_trajectories(text).unwrap();
        assert_eq!(eps.len(), 2);
        assert_eq!(eps[1][2].x, v(&[0.3, 0.4]));
        assert_eq!(transitions(&eps).len(), 3);
        assert_eq!(parse_trajectories(&format_trajectories(&eps)).unwrap(), eps);

        let with_y = "k,x1,u1,y1,y2\n0,1,2,3,4\n";
        let eps = parse_trajectories(with_y).unwrap();
        assert_eq!(eps[0][0].y, Some(v(&[3.0, 4.0])));
        assert!(parse_trajectories("k,x1,u1\n0,1\n").is_err());
        assert!(parse_trajectories("k,z1\n").is_err());

        let tagged = parse_trajectories("k,x1,u1,mode\n0,1,2,1\n").unwrap();
        assert_eq!(tagged[0][0].x, v(&[1.0]));
    }
}
