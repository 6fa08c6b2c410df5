//! Reachable sets of piecewise affine systems from data-driven model sets.
//!
//! Each step restricts the current set to every region, pushes each piece
//! through its mode's model set, adds process noise and unions the results.

use crate::error::{check_dim, Error, Result};
use crate::linalg::vcat;
use crate::oracle::{Hull, LeafSet, OracleConfig};
use crate::setops::{matzono_times_set_in_hull, HybridZonotope, MatrixZonotope, PolyhedralRegion, Zonotope};
use crate::ident::PwaSystemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReachOptions {
    /// Replace every union set by its interval hull before the next step.
    pub hull_relaxation: bool,
    pub oracle: OracleConfig,
}

/// Reachable set at one step with its per-region pieces.
#[derive(Debug, Clone)]
pub struct ReachFamily {
    pub step: usize,
    pub union_set: HybridZonotope,
    /// `union_set ∩ C_i` for every region.
    pub per_mode: Vec<HybridZonotope>,
    pub empty: Vec<bool>,
    hulls: Vec<Option<Hull>>,
}

impl ReachFamily {
    pub fn new(step: usize, union_set: HybridZonotope, regions: &[PolyhedralRegion]) -> Result<Self> {
        Self::with_config(step, union_set, regions, &OracleConfig::default())
    }

    pub fn with_config(
        step: usize,
        union_set: HybridZonotope,
        regions: &[PolyhedralRegion],
        cfg: &OracleConfig,
    ) -> Result<Self> {
        let mut per_mode = Vec::with_capacity(regions.len());
        let mut hulls = Vec::with_capacity(regions.len());
        for r in regions {
            let piece = restrict_to_region(&union_set, r)?;
            hulls.push(LeafSet::with_config(&piece, cfg)?.interval_hull());
            per_mode.push(piece);
        }
        let empty = hulls.iter().map(Option::is_none).collect();
        Ok(Self {
            step,
            union_set,
            per_mode,
            empty,
            hulls,
        })
    }

    /// Interval hull of the piece in region `i`, `None` when that piece is empty.
    pub fn mode_hull(&self, i: usize) -> Option<&Hull> {
        self.hulls.get(i).and_then(Option::as_ref)
    }

    pub fn is_empty(&self) -> bool {
        self.empty.iter().all(|e| *e)
    }

    /// Number of continuous generators, binary generators and constraints of
    /// the union set.
    pub fn complexity(&self) -> usize {
        self.union_set.complexity()
    }
}

/// `z ∩ C` by one halfspace intersection per row of the region.
pub fn restrict_to_region(z: &HybridZonotope, region: &PolyhedralRegion) -> Result<HybridZonotope> {
    check_dim("region dimension", z.dim(), region.dim())?;
    region
        .halfspaces()
        .try_fold(z.clone(), |acc, h| acc.halfspace_intersection(&h))
}

/// `M (X × U) ⊕ W`, or the empty set when `X` is empty.
pub fn propagate_mode(
    model: &MatrixZonotope,
    state_set: &HybridZonotope,
    input_set: &HybridZonotope,
    noise: &Zonotope,
) -> Result<HybridZonotope> {
    match LeafSet::new(state_set)?.interval_hull() {
        Some(hx) => {
            let hu = LeafSet::new(input_set)?
                .interval_hull()
                .ok_or(Error::EmptySet)?;
            propagate_with_hulls(model, state_set, &hx, input_set, &hu, noise)
        }
        None => Ok(HybridZonotope::empty(model.shape().0)),
    }
}

fn propagate_with_hulls(
    model: &MatrixZonotope,
    state_set: &HybridZonotope,
    state_hull: &Hull,
    input_set: &HybridZonotope,
    input_hull: &Hull,
    noise: &Zonotope,
) -> Result<HybridZonotope> {
    check_dim(
        "model columns",
        state_set.dim() + input_set.dim(),
        model.shape().1,
    )?;
    check_dim("process noise", model.shape().0, noise.dim())?;
    let product = state_set.cartesian_product(input_set);
    let hull = Hull {
        lower: vcat(&[&state_hull.lower, &input_hull.lower]),
        upper: vcat(&[&state_hull.upper, &input_hull.upper]),
    };
    matzono_times_set_in_hull(model, &product, &hull)?.minkowski_sum(&HybridZonotope::from_zonotope(noise))
}

/// One step: propagate every nonempty piece through its model set and union the
/// results in ascending mode order.
pub fn reach_step(
    family: &ReachFamily,
    models: &[MatrixZonotope],
    regions: &[PolyhedralRegion],
    input_sets: &[HybridZonotope],
    noise: &Zonotope,
) -> Result<ReachFamily> {
    reach_step_with(family, models, regions, input_sets, noise, &ReachOptions::default())
}

pub fn reach_step_with(
    family: &ReachFamily,
    models: &[MatrixZonotope],
    regions: &[PolyhedralRegion],
    input_sets: &[HybridZonotope],
    noise: &Zonotope,
    opts: &ReachOptions,
) -> Result<ReachFamily> {
    let next = propagate_family(family, models, input_sets, noise, opts)?;
    ReachFamily::with_config(family.step + 1, next, regions, &opts.oracle)
}

/// Union of the propagated pieces of `family` (before restriction to regions).
pub fn propagate_family(
    family: &ReachFamily,
    models: &[MatrixZonotope],
    input_sets: &[HybridZonotope],
    noise: &Zonotope,
    opts: &ReachOptions,
) -> Result<HybridZonotope> {
    let s = family.per_mode.len();
    check_dim("model count", s, models.len())?;
    check_dim("input set count", s, input_sets.len())?;
    let n = noise.dim();
    let mut branches = Vec::new();
    for i in 0..s {
        let Some(hx) = family.mode_hull(i) else {
            continue;
        };
        let hu = LeafSet::with_config(&input_sets[i], &opts.oracle)?
            .interval_hull()
            .ok_or(Error::EmptySet)?;
        branches.push(propagate_with_hulls(
            &models[i],
            &family.per_mode[i],
            hx,
            &input_sets[i],
            &hu,
            noise,
        )?);
    }
    if branches.is_empty() {
        return Ok(HybridZonotope::empty(n));
    }
    let next = HybridZonotope::union_all(&branches)?;
    if !opts.hull_relaxation {
        return Ok(next);
    }
    match LeafSet::with_config(&next, &opts.oracle)?.interval_hull() {
        Some(h) => Ok(HybridZonotope::from_zonotope(&Zonotope::from_box(
            h.midpoint(),
            &h.radius(),
        )?)),
        None => Ok(HybridZonotope::empty(n)),
    }
}

/// Families for steps `0..=n`, starting from `initial`.
pub fn reach_horizon(
    initial: &HybridZonotope,
    models: &[MatrixZonotope],
    regions: &[PolyhedralRegion],
    input_sets: &[HybridZonotope],
    noise: &Zonotope,
    n: usize,
) -> Result<Vec<ReachFamily>> {
    reach_horizon_with(initial, models, regions, input_sets, noise, n, &ReachOptions::default())
}

pub fn reach_horizon_with(
    initial: &HybridZonotope,
    models: &[MatrixZonotope],
    regions: &[PolyhedralRegion],
    input_sets: &[HybridZonotope],
    noise: &Zonotope,
    n: usize,
    opts: &ReachOptions,
) -> Result<Vec<ReachFamily>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(ReachFamily::with_config(0, initial.clone(), regions, &opts.oracle)?);
    for _ in 0..n {
        let next = reach_step_with(out.last().expect("nonempty"), models, regions, input_sets, noise, opts)?;
        out.push(next);
    }
    Ok(out)
}

/// Model-based baseline: the same loop with the singleton models `[A_i B_i]`.
pub fn reach_horizon_known(
    initial: &HybridZonotope,
    spec: &PwaSystemSpec,
    input_sets: &[HybridZonotope],
    n: usize,
) -> Result<Vec<ReachFamily>> {
    let models = known_models(spec)?;
    reach_horizon(initial, &models, &spec.regions, input_sets, &spec.noise_w, n)
}

/// Singleton matrix zonotopes `[A_i B_i]` of a spec with known dynamics.
pub fn known_models(spec: &PwaSystemSpec) -> Result<Vec<MatrixZonotope>> {
    let modes = spec
        .modes
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("system has no known dynamics".into()))?;
    Ok(modes.iter().map(|m| MatrixZonotope::point(m.stacked())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ident::Mode;
    use crate::linalg::{Matrix, Vector};
    use crate::oracle::{self, directions, MEMBER_TOL};

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    fn boxed(c: &[f64], r: f64) -> HybridZonotope {
        let n = c.len();
        HybridZonotope::from_zonotope(&Zonotope::new(v(c), Matrix::identity(n, n) * r).unwrap())
    }

    fn halfplanes() -> Vec<PolyhedralRegion> {
        vec![
            PolyhedralRegion::new(Matrix::from_row_slice(1, 2, &[1.0, 0.0]), v(&[0.0])).unwrap(),
            PolyhedralRegion::new(Matrix::from_row_slice(1, 2, &[-1.0, 0.0]), v(&[0.0])).unwrap(),
        ]
    }

    fn a1() -> Matrix {
        Matrix::from_row_slice(2, 2, &[0.75, 0.25, -0.25, 0.75])
    }

    fn b1() -> Matrix {
        Matrix::from_row_slice(2, 1, &[-0.25, -0.25])
    }

    fn a2() -> Matrix {
        Matrix::from_row_slice(2, 2, &[0.75, -0.25, 0.25, 0.75])
    }

    fn b2() -> Matrix {
        Matrix::from_row_slice(2, 1, &[0.25, -0.25])
    }

    #[test]
    fn restriction_examples() {
        let left = &halfplanes()[0];
        let h = oracle::interval_hull(&restrict_to_region(&boxed(&[0.0, 0.0], 1.0), left).unwrap())
            .unwrap()
            .unwrap();
        assert!((h.lower - v(&[-1.0, -1.0])).amax() < 1e-9);
        assert!((h.upper - v(&[0.0, 1.0])).amax() < 1e-9);

        let inside = boxed(&[-3.0, 0.0], 1.0);
        let r = restrict_to_region(&inside, left).unwrap();
        for d in directions(2, 16) {
            assert!((oracle::support(&r, &d).unwrap() - oracle::support(&inside, &d).unwrap()).abs() < 1e-9);
        }
        let outside = boxed(&[3.0, 0.0], 1.0);
        assert!(oracle::is_empty(&restrict_to_region(&outside, left).unwrap()).unwrap());
    }

    #[test]
    fn propagate_examples() {
        let model = MatrixZonotope::point(crate::linalg::hstack(2, &[&a1(), &b1()]));
        let x = v(&[-1.0, 2.0]);
        let u = v(&[0.5]);
        let out = propagate_mode(
            &model,
            &HybridZonotope::point(x.clone()),
            &HybridZonotope::point(u.clone()),
            &Zonotope::point(v(&[0.0, 0.0])),
        )
        .unwrap();
        let h = oracle::interval_hull(&out).unwrap().unwrap();
        let expect = a1() * &x + b1() * &u;
        assert!((h.lower - &expect).amax() < 1e-12 && (h.upper - &expect).amax() < 1e-12);

        let ident = MatrixZonotope::point(Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        let s = boxed(&[0.3, -0.2], 0.5);
        let out = propagate_mode(&ident, &s, &HybridZonotope::point(v(&[0.0])), &Zonotope::point(v(&[0.0, 0.0]))).unwrap();
        for d in directions(2, 16) {
            assert!((oracle::support(&out, &d).unwrap() - oracle::support(&s, &d).unwrap()).abs() < 1e-9);
        }

        let scalar = MatrixZonotope::new(
            Matrix::from_row_slice(1, 2, &[0.5, 1.0]),
            vec![Matrix::from_row_slice(1, 2, &[0.1, 0.0])],
        )
        .unwrap();
        let out = propagate_mode(&scalar, &boxed(&[0.0], 1.0), &HybridZonotope::point(v(&[0.0])), &Zonotope::point(v(&[0.0])))
            .unwrap();
        for k in 0..=100 {
            let x = -1.0 + 0.02 * k as f64;
            for a in [0.4, 0.5, 0.6] {
                assert!(oracle::membership(&out, &v(&[a * x]), 1e-9).unwrap());
            }
        }
        let empty = propagate_mode(&scalar, &HybridZonotope::empty(1), &HybridZonotope::point(v(&[0.0])), &Zonotope::point(v(&[0.0])))
            .unwrap();
        assert!(oracle::is_empty(&empty).unwrap());
    }

    fn spec(noise: f64) -> PwaSystemSpec {
        PwaSystemSpec::new(
            Some(vec![Mode::new(a1(), b1()).unwrap(), Mode::new(a2(), b2()).unwrap()]),
            halfplanes(),
            Zonotope::new(Vector::zeros(2), Matrix::identity(2, 2) * noise).unwrap(),
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn single_active_mode_matches_propagation() {
        let sp = spec(0.0);
        let models = known_models(&sp).unwrap();
        let inputs = vec![boxed(&[0.0], 1.0); 2];
        let x0 = boxed(&[-3.0, 1.0], 0.5);
        let fam = ReachFamily::new(0, x0.clone(), &sp.regions).unwrap();
        assert_eq!(fam.empty, vec![false, true]);
        let next = reach_step(&fam, &models, &sp.regions, &inputs, &sp.noise_w).unwrap();
        let direct = propagate_mode(&models[0], &x0, &inputs[0], &sp.noise_w).unwrap();
        for d in directions(2, 16) {
            assert!((oracle::support(&next.union_set, &d).unwrap() - oracle::support(&direct, &d).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn straddling_set_splits_into_pieces() {
        let sp = spec(0.0);
        let fam = ReachFamily::new(0, boxed(&[0.0, 0.0], 1.0), &sp.regions).unwrap();
        assert_eq!(fam.empty, vec![false, false]);
        let samples = oracle::sample(&fam.union_set, 200, 2).unwrap();
        for x in &samples {
            let inside: Vec<bool> = fam
                .per_mode
                .iter()
                .map(|p| oracle::membership(p, x, MEMBER_TOL).unwrap())
                .collect();
            assert!(inside.iter().any(|b| *b));
        }
        for (i, p) in fam.per_mode.iter().enumerate() {
            for x in oracle::sample(p, 50, 7).unwrap() {
                assert!(sp.regions[i].contains(&x, 1e-7));
                assert!(oracle::membership(&fam.union_set, &x, MEMBER_TOL).unwrap());
            }
        }
    }

    #[test]
    fn horizon_bookkeeping() {
        let sp = spec(0.0);
        let models = known_models(&sp).unwrap();
        let inputs = vec![boxed(&[0.0], 1.0); 2];
        let x0 = boxed(&[-1.0, 2.0], 0.25);
        let zero = reach_horizon(&x0, &models, &sp.regions, &inputs, &sp.noise_w, 0).unwrap();
        assert_eq!(zero.len(), 1);
        let one = reach_horizon(&x0, &models, &sp.regions, &inputs, &sp.noise_w, 1).unwrap();
        let step = reach_step(&zero[0], &models, &sp.regions, &inputs, &sp.noise_w).unwrap();
        assert_eq!(one[1].union_set, step.union_set);
    }

    #[test]
    fn identity_dynamics_stay_put() {
        let sp = PwaSystemSpec::new(
            Some(vec![Mode::new(Matrix::identity(2, 2), Matrix::zeros(2, 1)).unwrap()]),
            vec![PolyhedralRegion::universe(2)],
            Zonotope::point(Vector::zeros(2)),
            Vec::new(),
        )
        .unwrap();
        let x0 = boxed(&[1.0, -1.0], 0.5);
        let fams = reach_horizon_known(&x0, &sp, &[HybridZonotope::point(v(&[0.0]))], 3).unwrap();
        for f in &fams {
            for d in directions(2, 8) {
                assert!((oracle::support(&f.union_set, &d).unwrap() - oracle::support(&x0, &d).unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mode_two_step_matches_zonotope_map() {
        let sp = spec(0.0);
        let g = Matrix::from_row_slice(2, 2, &[0.25, -0.19, 0.19, 0.25]);
        let r0 = Zonotope::new(v(&[1.51, 2.55]), g).unwrap();
        let u = Zonotope::new(v(&[0.0]), Matrix::from_element(1, 1, 1.0)).unwrap();
        let fams = reach_horizon_known(
            &HybridZonotope::from_zonotope(&r0),
            &sp,
            &[HybridZonotope::from_zonotope(&u), HybridZonotope::from_zonotope(&u)],
            1,
        )
        .unwrap();
        let mapped = r0.linear_map(&a2()).unwrap();
        let bu = u.linear_map(&b2()).unwrap();
        let h = oracle::interval_hull(&fams[1].union_set).unwrap().unwrap();
        let expect_c = mapped.center() + bu.center();
        let expect_r = mapped.radius() + bu.radius();
        assert!((h.midpoint() - expect_c).amax() < 1e-9);
        assert!((h.radius() - expect_r).amax() < 1e-9);
    }

    #[test]
    fn hull_relaxation_is_a_superset() {
        let sp = spec(0.01);
        let models = known_models(&sp).unwrap();
        let inputs = vec![boxed(&[0.0], 1.0); 2];
        let x0 = boxed(&[0.0, 1.0], 0.5);
        let exact = reach_horizon(&x0, &models, &sp.regions, &inputs, &sp.noise_w, 2).unwrap();
        let opts = ReachOptions {
            hull_relaxation: true,
            ..Default::default()
        };
        let relaxed = reach_horizon_with(&x0, &models, &sp.regions, &inputs, &sp.noise_w, 2, &opts).unwrap();
        assert_eq!(relaxed[2].union_set.num_bin(), 0);
        for d in directions(2, 16) {
            assert!(
                oracle::support(&relaxed[2].union_set, &d).unwrap() >= oracle::support(&exact[2].union_set, &d).unwrap() - 1e-9
            );
        }
    }
}
