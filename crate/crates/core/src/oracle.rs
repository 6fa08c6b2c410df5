//! Exact semantic queries on hybrid zonotopes.
//!
//! Binary assignments are enumerated depth first. At each node the equality
//! constraints are propagated over the current factor bounds: a row whose
//! minimal (or maximal) activity equals its right-hand side pins every factor it
//! touches, and binaries whose value would violate a row are fixed to the other
//! value. Each complete assignment is a constrained zonotope ("leaf"); its free
//! continuous factors form a small LP solved by [`crate::lp`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{pinv, Matrix, Vector};
use crate::lp::{self, FeasibleBasis, LpProblem};
use crate::setops::{HybridZonotope, MatrixZonotope};

/// Default cap on the number of free binary choices along one enumeration path.
pub const DEFAULT_BINARY_CAP: usize = 20;

/// Membership tolerance used by sampling and containment checks.
pub const MEMBER_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub binary_cap: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            binary_cap: DEFAULT_BINARY_CAP,
        }
    }
}

/// Interval hull `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hull {
    pub lower: Vector,
    pub upper: Vector,
}

impl Hull {
    pub fn midpoint(&self) -> Vector {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn radius(&self) -> Vector {
        (&self.upper - &self.lower) * 0.5
    }

    /// Largest absolute coordinate over the box.
    pub fn max_abs(&self) -> f64 {
        self.lower.amax().max(self.upper.amax())
    }
}

/// Constrained zonotope obtained by fixing every binary factor: the free
/// continuous factors `ξ` range over `[lo, hi]` subject to `A ξ = b`, and the
/// point is `center + G ξ`.
#[derive(Debug, Clone)]
pub struct LeafProblem {
    pub center: Vector,
    pub generators: Matrix,
    pub eq_a: Matrix,
    pub eq_b: Vector,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Binary assignment that produced this leaf.
    pub binaries: Vec<f64>,
}

impl LeafProblem {
    fn lp(&self) -> LpProblem {
        LpProblem::new(
            self.eq_a.clone(),
            self.eq_b.clone(),
            self.lo.clone(),
            self.hi.clone(),
        )
    }

    pub fn point(&self, xi: &[f64]) -> Vector {
        &self.center + &self.generators * Vector::from_row_slice(xi)
    }
}

/// A leaf together with a feasible basis of its constraint system.
#[derive(Debug, Clone)]
pub struct FeasibleLeaf {
    pub problem: LeafProblem,
    basis: FeasibleBasis,
}

impl FeasibleLeaf {
    /// Support value and maximizing point of this leaf alone.
    pub fn support_point(&self, d: &Vector) -> (f64, Vector) {
        self.support(d)
    }

    fn support(&self, d: &Vector) -> (f64, Vector) {
        let obj: Vec<f64> = (self.problem.generators.transpose() * d)
            .iter()
            .cloned()
            .collect();
        let (v, xi) = self.basis.maximize(&obj);
        (d.dot(&self.problem.center) + v, self.problem.point(&xi))
    }

    fn contains(&self, x: &Vector, tol: f64) -> bool {
        let p = &self.problem;
        let nf = p.lo.len();
        let n = x.len();
        let m = p.eq_a.nrows();
        let mut a = Matrix::zeros(n + m, nf);
        a.view_mut((0, 0), (n, nf)).copy_from(&p.generators);
        a.view_mut((n, 0), (m, nf)).copy_from(&p.eq_a);
        let mut b = Vector::zeros(n + m);
        b.rows_mut(0, n).copy_from(&(x - &p.center));
        b.rows_mut(n, m).copy_from(&p.eq_b);
        let prob = LpProblem::new(a, b, p.lo.clone(), p.hi.clone());
        lp::phase1(&prob).residual <= tol
    }
}

struct SparseRow {
    idx: Vec<usize>,
    val: Vec<f64>,
    rhs: f64,
}

/// Depth-first enumerator over the binary factors of one hybrid zonotope.
struct Enumerator<'a> {
    z: &'a HybridZonotope,
    rows: Vec<SparseRow>,
    ng: usize,
    nb: usize,
    tol: f64,
    cap: usize,
}

impl<'a> Enumerator<'a> {
    fn new(z: &'a HybridZonotope, cap: usize) -> Self {
        let ng = z.num_cont();
        let nb = z.num_bin();
        let mut rows = Vec::with_capacity(z.num_cons());
        let mut scale: f64 = 1.0;
        for i in 0..z.num_cons() {
            let mut idx = Vec::new();
            let mut val = Vec::new();
            for j in 0..ng {
                let a = z.ac()[(i, j)];
                if a != 0.0 {
                    idx.push(j);
                    val.push(a);
                }
            }
            for j in 0..nb {
                let a = z.ab()[(i, j)];
                if a != 0.0 {
                    idx.push(ng + j);
                    val.push(a);
                }
            }
            let rhs = z.b()[i];
            scale = scale.max(rhs.abs());
            for v in &val {
                scale = scale.max(v.abs());
            }
            rows.push(SparseRow { idx, val, rhs });
        }
        Self {
            z,
            rows,
            ng,
            nb,
            tol: 1e-9 * scale,
            cap,
        }
    }

    /// Tightens bounds until a fixed point. Returns false if some row cannot be
    /// satisfied.
    fn propagate(&self, lo: &mut [f64], hi: &mut [f64]) -> bool {
        let tol = self.tol;
        for _pass in 0..64 {
            let mut changed = false;
            for row in &self.rows {
                let (mut min_act, mut max_act) = (0.0, 0.0);
                let mut free = 0usize;
                for (&j, &a) in row.idx.iter().zip(&row.val) {
                    let (p, q) = (a * lo[j], a * hi[j]);
                    min_act += p.min(q);
                    max_act += p.max(q);
                    if lo[j] < hi[j] {
                        free += 1;
                    }
                }
                if min_act > row.rhs + tol || max_act < row.rhs - tol {
                    return false;
                }
                if free == 0 {
                    continue;
                }
                let pin = if min_act >= row.rhs - tol {
                    Some(false)
                } else if max_act <= row.rhs + tol {
                    Some(true)
                } else {
                    None
                };
                if let Some(to_max) = pin {
                    // Only factors that can move the activity past the tolerance
                    // are pinned; rounding-level coefficients leave theirs free.
                    let room = if to_max {
                        max_act - row.rhs + tol
                    } else {
                        row.rhs + tol - min_act
                    };
                    let mut pinned = false;
                    for (&j, &a) in row.idx.iter().zip(&row.val) {
                        if lo[j] < hi[j] && a.abs() * (hi[j] - lo[j]) > room {
                            let v = if (a > 0.0) == to_max { hi[j] } else { lo[j] };
                            lo[j] = v;
                            hi[j] = v;
                            pinned = true;
                        }
                    }
                    if pinned {
                        changed = true;
                        continue;
                    }
                }
                for (&j, &a) in row.idx.iter().zip(&row.val) {
                    if j < self.ng || lo[j] == hi[j] {
                        continue;
                    }
                    // a·x_j must lie in [rhs − (max_act − max_j), rhs − (min_act − min_j)]
                    let (p, q) = (-a, a);
                    let (mn, mx) = (p.min(q), p.max(q));
                    let lo_ok = row.rhs - (max_act - mx);
                    let hi_ok = row.rhs - (min_act - mn);
                    let plus_ok = a >= lo_ok - tol && a <= hi_ok + tol;
                    let minus_ok = -a >= lo_ok - tol && -a <= hi_ok + tol;
                    match (minus_ok, plus_ok) {
                        (false, false) => return false,
                        (true, false) => {
                            lo[j] = -1.0;
                            hi[j] = -1.0;
                            changed = true;
                        }
                        (false, true) => {
                            lo[j] = 1.0;
                            hi[j] = 1.0;
                            changed = true;
                        }
                        (true, true) => {}
                    }
                }
            }
            if !changed {
                break;
            }
        }
        true
    }

    fn leaf(&self, lo: &[f64], hi: &[f64]) -> LeafProblem {
        let z = self.z;
        let n = z.dim();
        let free: Vec<usize> = (0..self.ng).filter(|&j| lo[j] < hi[j]).collect();
        let mut center = z.center().clone();
        for j in 0..self.ng {
            if lo[j] == hi[j] && lo[j] != 0.0 {
                center += z.gc().column(j) * lo[j];
            }
        }
        let binaries: Vec<f64> = (0..self.nb).map(|j| lo[self.ng + j]).collect();
        for (j, &v) in binaries.iter().enumerate() {
            center += z.gb().column(j) * v;
        }
        let generators = Matrix::from_fn(n, free.len(), |i, k| z.gc()[(i, free[k])]);
        let mut position = vec![usize::MAX; self.ng];
        for (k, &j) in free.iter().enumerate() {
            position[j] = k;
        }
        let mut a_rows: Vec<Vec<f64>> = Vec::new();
        let mut b_rows = Vec::new();
        for row in &self.rows {
            let mut coeffs = vec![0.0; free.len()];
            let mut rhs = row.rhs;
            let mut any = false;
            for (&j, &a) in row.idx.iter().zip(&row.val) {
                if j < self.ng && lo[j] < hi[j] {
                    coeffs[position[j]] = a;
                    any = true;
                } else {
                    rhs -= a * lo[j];
                }
            }
            if any {
                a_rows.push(coeffs);
                b_rows.push(rhs);
            }
        }
        let eq_a = Matrix::from_fn(a_rows.len(), free.len(), |i, k| a_rows[i][k]);
        LeafProblem {
            center,
            generators,
            eq_a,
            eq_b: Vector::from_vec(b_rows),
            lo: free.iter().map(|&j| lo[j]).collect(),
            hi: free.iter().map(|&j| hi[j]).collect(),
            binaries,
        }
    }

    /// Visits every leaf that survives propagation. The visitor returns `false`
    /// to stop early.
    fn run<F>(&self, visit: &mut F) -> Result<()>
    where
        F: FnMut(LeafProblem) -> bool,
    {
        let width = self.ng + self.nb;
        let mut lo = vec![-1.0; width];
        let mut hi = vec![1.0; width];
        self.dfs(&mut lo, &mut hi, 0, visit).map(|_| ())
    }

    fn dfs<F>(&self, lo: &mut Vec<f64>, hi: &mut Vec<f64>, depth: usize, visit: &mut F) -> Result<bool>
    where
        F: FnMut(LeafProblem) -> bool,
    {
        if !self.propagate(lo, hi) {
            return Ok(true);
        }
        // Most recently added binaries (union selectors) first.
        let branch = (self.ng..self.ng + self.nb).rev().find(|&j| lo[j] < hi[j]);
        match branch {
            None => Ok(visit(self.leaf(lo, hi))),
            Some(j) => {
                if depth >= self.cap {
                    return Err(Error::EnumerationCap { cap: self.cap });
                }
                for v in [-1.0, 1.0] {
                    let mut lo2 = lo.clone();
                    let mut hi2 = hi.clone();
                    lo2[j] = v;
                    hi2[j] = v;
                    if !self.dfs(&mut lo2, &mut hi2, depth + 1, visit)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

/// All feasible leaves of a hybrid zonotope, each with a warm feasible basis.
#[derive(Debug, Clone)]
pub struct LeafSet {
    dim: usize,
    leaves: Vec<FeasibleLeaf>,
}

impl LeafSet {
    pub fn new(z: &HybridZonotope) -> Result<Self> {
        Self::with_config(z, &OracleConfig::default())
    }

    pub fn with_config(z: &HybridZonotope, cfg: &OracleConfig) -> Result<Self> {
        let en = Enumerator::new(z, cfg.binary_cap);
        let mut leaves = Vec::new();
        en.run(&mut |leaf| {
            let prob = leaf.lp();
            let tol = prob.default_tol();
            if let Some(basis) = lp::feasible_basis(&prob, tol) {
                leaves.push(FeasibleLeaf {
                    problem: leaf,
                    basis,
                });
            }
            true
        })?;
        Ok(Self {
            dim: z.dim(),
            leaves,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn leaves(&self) -> &[FeasibleLeaf] {
        &self.leaves
    }

    /// `h(Z, d)`, or `None` for the empty set.
    pub fn support(&self, d: &Vector) -> Option<f64> {
        self.support_point(d).map(|(v, _)| v)
    }

    /// Support value and a maximizing point.
    pub fn support_point(&self, d: &Vector) -> Option<(f64, Vector)> {
        self.leaves
            .iter()
            .map(|l| l.support(d))
            .fold(None, |best: Option<(f64, Vector)>, cur| match best {
                Some(b) if b.0 >= cur.0 => Some(b),
                _ => Some(cur),
            })
    }

    pub fn interval_hull(&self) -> Option<Hull> {
        if self.is_empty() {
            return None;
        }
        let n = self.dim;
        let mut lower = Vector::zeros(n);
        let mut upper = Vector::zeros(n);
        for k in 0..n {
            let mut e = Vector::zeros(n);
            e[k] = 1.0;
            upper[k] = self.support(&e)?;
            e[k] = -1.0;
            lower[k] = -self.support(&e)?;
        }
        Some(Hull { lower, upper })
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.leaves.iter().any(|l| l.contains(x, tol))
    }

    /// Deterministic sample of `count` member points.
    ///
    /// Within a leaf, factors are drawn uniformly from the box and projected onto
    /// the affine constraint set by a least-norm correction; draws that leave the
    /// box are rejected. If rejection keeps failing, points are taken as random
    /// convex combinations of support points of the leaf, which stay members
    /// because each leaf is convex.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Vector>> {
        if self.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut per_leaf = vec![0usize; self.leaves.len()];
        for _ in 0..count {
            per_leaf[rng.gen_range(0..self.leaves.len())] += 1;
        }
        let mut out = Vec::with_capacity(count);
        for (k, (leaf, &want)) in self.leaves.iter().zip(&per_leaf).enumerate() {
            if want == 0 {
                continue;
            }
            let leaf_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(k as u64 + 1);
            out.extend(sample_leaf(leaf, want, leaf_seed));
        }
        Ok(out)
    }

    /// Support points in `count` random directions (boundary points of the set).
    pub fn boundary_points(&self, count: usize, seed: u64) -> Result<Vec<Vector>> {
        if self.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| {
                let d = random_unit(&mut rng, self.dim);
                self.support_point(&d).expect("nonempty").1
            })
            .collect())
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let d = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let norm = d.norm();
        if norm > 1e-3 && norm <= 1.0 {
            return d / norm;
        }
    }
}

fn sample_leaf(leaf: &FeasibleLeaf, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = &leaf.problem;
    let nf = p.lo.len();
    if nf == 0 {
        return vec![p.center.clone(); count];
    }
    let proj = if p.eq_a.nrows() > 0 {
        Some(pinv(&p.eq_a, 1e-10))
    } else {
        None
    };
    let mut out = Vec::with_capacity(count);
    let max_attempts = 200 * count;
    let mut attempts = 0;
    while out.len() < count && attempts < max_attempts {
        attempts += 1;
        let mut xi = Vector::from_fn(nf, |i, _| rng.gen_range(p.lo[i]..=p.hi[i]));
        if let Some(proj) = &proj {
            let r = &p.eq_b - &p.eq_a * &xi;
            xi += proj * r;
            if (&p.eq_a * &xi - &p.eq_b).amax() > 1e-9 {
                continue;
            }
        }
        if xi.iter().zip(&p.lo).zip(&p.hi).all(|((v, l), h)| *v >= *l && *v <= *h) {
            out.push(&p.center + &p.generators * xi);
        }
        // Give up on rejection early when it is hopeless.
        if attempts == 50 * count.min(20) && out.is_empty() {
            break;
        }
    }
    if out.len() < count {
        let n = p.center.len();
        let anchors: Vec<Vec<f64>> = (0..(2 * n + 4))
            .map(|_| {
                let d = Vector::from_fn(nf, |_, _| rng.gen_range(-1.0..1.0));
                let obj: Vec<f64> = d.iter().cloned().collect();
                leaf.basis.maximize(&obj).1
            })
            .collect();
        while out.len() < count {
            let w: Vec<f64> = anchors.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = w.iter().sum();
            let mut xi = vec![0.0; nf];
            for (a, wk) in anchors.iter().zip(&w) {
                for (x, v) in xi.iter_mut().zip(a) {
                    *x += v * wk / total;
                }
            }
            out.push(p.point(&xi));
        }
    }
    out
}

/// True iff `x` is a member of `z` with all equalities satisfied within `tol`.
pub fn membership(z: &HybridZonotope, x: &Vector, tol: f64) -> Result<bool> {
    check_dim("membership", z.dim(), x.len())?;
    Ok(LeafSet::new(z)?.contains(x, tol))
}

/// Support function `max_{x ∈ Z} dᵀx`; `-∞` for the empty set.
pub fn support(z: &HybridZonotope, d: &Vector) -> Result<f64> {
    check_dim("support", z.dim(), d.len())?;
    if d.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidInput("support direction is zero".into()));
    }
    Ok(LeafSet::new(z)?.support(d).unwrap_or(f64::NEG_INFINITY))
}

/// Interval hull, or `None` for the empty set.
pub fn interval_hull(z: &HybridZonotope) -> Result<Option<Hull>> {
    Ok(LeafSet::new(z)?.interval_hull())
}

pub fn is_empty(z: &HybridZonotope) -> Result<bool> {
    Ok(LeafSet::new(z)?.is_empty())
}

pub fn sample(z: &HybridZonotope, count: usize, seed: u64) -> Result<Vec<Vector>> {
    LeafSet::new(z)?.sample(count, seed)
}

/// `count` evenly spread unit directions: a uniform fan in 2-D, `±e₁` in 1-D, and
/// coordinate axes followed by seeded random directions otherwise.
pub fn directions(n: usize, count: usize) -> Vec<Vector> {
    match n {
        0 => Vec::new(),
        1 => (0..count)
            .map(|k| Vector::from_element(1, if k % 2 == 0 { 1.0 } else { -1.0 }))
            .collect(),
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                Vector::from_row_slice(&[t.cos(), t.sin()])
            })
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(count);
            for k in 0..(2 * n).min(count) {
                let mut e = Vector::zeros(n);
                e[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                out.push(e);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            while out.len() < count {
                out.push(random_unit(&mut rng, n));
            }
            out
        }
    }
}

/// Membership of a real matrix in a matrix zonotope: solves for `β ∈ [-1,1]^k`
/// with `C + Σ β_j G_j = X`, each entry within `tol`.
pub fn matrix_zonotope_contains(m: &MatrixZonotope, x: &Matrix, tol: f64) -> Result<bool> {
    if x.shape() != m.shape() {
        return Err(Error::InvalidInput(format!(
            "matrix of shape {:?} tested against a {:?} matrix zonotope",
            x.shape(),
            m.shape()
        )));
    }
    let (r, c) = m.shape();
    let k = m.num_generators();
    let a = Matrix::from_fn(r * c, k, |i, j| m.generators()[j][(i % r, i / r)]);
    let b = Vector::from_fn(r * c, |i, _| x[(i % r, i / r)] - m.center()[(i % r, i / r)]);
    let prob = LpProblem::unit_box(a, b);
    Ok(lp::phase1(&prob).residual <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setops::{Halfspace, Zonotope};

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    fn unit_box(n: usize) -> HybridZonotope {
        HybridZonotope::from_zonotope(&Zonotope::new(Vector::zeros(n), Matrix::identity(n, n)).unwrap())
    }

    fn interval(lo: f64, hi: f64) -> HybridZonotope {
        HybridZonotope::from_zonotope(
            &Zonotope::new(v(&[(lo + hi) / 2.0]), Matrix::from_element(1, 1, (hi - lo) / 2.0)).unwrap(),
        )
    }

    /// Brute-force membership: enumerate every binary assignment without
    /// propagation and solve each leaf's residual LP.
    fn brute_member(z: &HybridZonotope, x: &Vector) -> bool {
        let nb = z.num_bin();
        (0..(1usize << nb)).any(|mask| {
            let xb = Vector::from_fn(nb, |j, _| if mask >> j & 1 == 1 { 1.0 } else { -1.0 });
            let n = z.dim();
            let m = z.num_cons();
            let ng = z.num_cont();
            let mut a = Matrix::zeros(n + m, ng);
            a.view_mut((0, 0), (n, ng)).copy_from(z.gc());
            a.view_mut((n, 0), (m, ng)).copy_from(z.ac());
            let mut b = Vector::zeros(n + m);
            b.rows_mut(0, n).copy_from(&(x - z.center() - z.gb() * &xb));
            b.rows_mut(n, m).copy_from(&(z.b() - z.ab() * &xb));
            lp::phase1(&LpProblem::unit_box(a, b)).residual <= 1e-9
        })
    }

    #[test]
    fn membership_examples() {
        let b = unit_box(2);
        assert!(membership(&b, &v(&[0.0, 0.0]), 1e-9).unwrap());
        assert!(!membership(&b, &v(&[2.0, 0.0]), 1e-9).unwrap());
        let u = interval(-1.0, 0.0).union(&interval(1.0, 2.0)).unwrap();
        assert!(!membership(&u, &v(&[0.5]), 1e-9).unwrap());
        assert!(membership(&b, &v(&[1.0, 1.0]), 1e-9).unwrap());
    }

    #[test]
    fn support_examples() {
        let b = unit_box(2);
        let e1 = v(&[1.0, 0.0]);
        assert!((support(&b, &e1).unwrap() - 1.0).abs() < 1e-12);
        let bb = b.minkowski_sum(&b).unwrap();
        assert!((support(&bb, &e1).unwrap() - 2.0).abs() < 1e-12);
        let half = b
            .halfspace_intersection(&Halfspace::new(e1.clone(), 0.0).unwrap())
            .unwrap();
        assert!(support(&half, &e1).unwrap().abs() < 1e-9);
        assert!(support(&b, &v(&[0.0, 0.0])).is_err());
        assert_eq!(support(&HybridZonotope::empty(2), &e1).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn hull_examples() {
        let h = interval_hull(&unit_box(2)).unwrap().unwrap();
        assert_eq!(h.lower, v(&[-1.0, -1.0]));
        assert_eq!(h.upper, v(&[1.0, 1.0]));
        let t = unit_box(2).translate(&v(&[3.0, 3.0])).unwrap();
        let h = interval_hull(&t).unwrap().unwrap();
        assert_eq!(h.lower, v(&[2.0, 2.0]));
        let half = unit_box(2)
            .halfspace_intersection(&Halfspace::new(v(&[1.0, 0.0]), 0.0).unwrap())
            .unwrap();
        let h = interval_hull(&half).unwrap().unwrap();
        assert!((h.upper - v(&[0.0, 1.0])).amax() < 1e-9);
        assert!((h.lower - v(&[-1.0, -1.0])).amax() < 1e-9);
        assert!(interval_hull(&HybridZonotope::empty(3)).unwrap().is_none());
    }

    #[test]
    fn emptiness_examples() {
        assert!(!is_empty(&unit_box(2)).unwrap());
        let far = unit_box(2).translate(&v(&[5.0, 5.0])).unwrap();
        let e = unit_box(2)
            .generalized_intersection(&Matrix::identity(2, 2), &far)
            .unwrap();
        assert!(is_empty(&e).unwrap());
        let contradictory = HybridZonotope::new(
            Matrix::identity(1, 1),
            Matrix::zeros(1, 0),
            v(&[0.0]),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 0),
            v(&[1.0]),
        )
        .unwrap();
        assert!(is_empty(&contradictory).unwrap());
    }

    #[test]
    fn samples_are_members_and_deterministic() {
        let b = unit_box(2);
        let s = sample(&b, 50, 3).unwrap();
        assert!(s.iter().all(|x| x.amax() <= 1.0));
        assert_eq!(s, sample(&b, 50, 3).unwrap());

        let p = HybridZonotope::point(v(&[1.0, 2.0]));
        assert!(sample(&p, 5, 1).unwrap().iter().all(|x| *x == v(&[1.0, 2.0])));

        let u = interval(-1.0, 0.0).union(&interval(1.0, 2.0)).unwrap();
        for x in sample(&u, 100, 9).unwrap() {
            assert!((-1.0 - 1e-9..=0.0 + 1e-9).contains(&x[0]) || (1.0 - 1e-9..=2.0 + 1e-9).contains(&x[0]));
            assert!(membership(&u, &x, MEMBER_TOL).unwrap());
        }
        assert_eq!(sample(&HybridZonotope::empty(1), 3, 0), Err(Error::EmptySet));
    }

    #[test]
    fn thin_sets_fall_back_to_convex_combinations() {
        // A slab of width 1e-3 inside a large box rejects almost every draw.
        let big = HybridZonotope::from_zonotope(
            &Zonotope::new(Vector::zeros(2), Matrix::identity(2, 2) * 10.0).unwrap(),
        );
        let slab = HybridZonotope::from_zonotope(
            &Zonotope::new(v(&[0.3]), Matrix::from_element(1, 1, 5e-4)).unwrap(),
        );
        let cut = big
            .generalized_intersection(&Matrix::from_row_slice(1, 2, &[1.0, 0.4]), &slab)
            .unwrap();
        let pts = sample(&cut, 40, 11).unwrap();
        assert_eq!(pts.len(), 40);
        for x in &pts {
            assert!(membership(&cut, x, MEMBER_TOL).unwrap());
        }
    }

    #[test]
    fn enumeration_cap_is_reported() {
        let mut z = interval(0.0, 1.0);
        for k in 0..4 {
            z = z.union(&interval(2.0 * k as f64 + 2.0, 2.0 * k as f64 + 3.0)).unwrap();
        }
        let cfg = OracleConfig { binary_cap: 2 };
        assert_eq!(LeafSet::with_config(&z, &cfg).err(), Some(Error::EnumerationCap { cap: 2 }));
        assert_eq!(LeafSet::new(&z).unwrap().leaves().len(), 5);
    }

    #[test]
    fn propagation_agrees_with_brute_force_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..20 {
            let mut z = HybridZonotope::from_zonotope(
                &Zonotope::new(
                    Vector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0)),
                    Matrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)),
                )
                .unwrap(),
            );
            for _ in 0..2 {
                let other = HybridZonotope::from_zonotope(
                    &Zonotope::new(
                        Vector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0)),
                        Matrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)),
                    )
                    .unwrap(),
                )
                .halfspace_intersection(
                    &Halfspace::new(Vector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0)), rng.gen_range(-0.5..0.5)).unwrap(),
                )
                .unwrap();
                z = z.union(&other).unwrap();
            }
            let set = LeafSet::new(&z).unwrap();
            for _ in 0..30 {
                let x = Vector::from_fn(2, |_, _| rng.gen_range(-4.0..4.0));
                assert_eq!(set.contains(&x, 1e-9), brute_member(&z, &x), "trial {trial} x {x:?}");
            }
        }
    }

    #[test]
    fn rounding_level_coefficients_do_not_prune_branches() {
        // Row 1 is tight at the all-(-1) corner, so the union's selector column
        // picks up a coefficient at rounding level on that row.
        let m = |r: usize, c: usize, d: &[f64]| Matrix::from_column_slice(r, c, d);
        let a = HybridZonotope::new(
            m(2, 9, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7892782804320511, 0.9021974078432645, 0.0, -0.4315068813496479, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            m(2, 1, &[-0.875569046436468, 0.34380675749973716]),
            v(&[-0.08629076600441693, 0.8144972839933537]),
            m(4, 9, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -0.011453544285427997, 0.0, 1.0, 0.0, -0.2824756931196398, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0, 3.0]),
            m(4, 1, &[0.0, 0.8929424184355614, 4.0, -3.0]),
            v(&[0.0, -0.5990131810304935, -4.0, -3.0]),
        )
        .unwrap();
        let u = a.union(&a).unwrap();
        let leaves = LeafSet::new(&u).unwrap();
        let selectors: Vec<f64> = leaves.leaves().iter().map(|l| l.problem.binaries[2]).collect();
        assert!(selectors.contains(&-1.0) && selectors.contains(&1.0), "{selectors:?}");
    }

    #[test]
    fn zonotope_support_matches_closed_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let z = Zonotope::new(
                Vector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0)),
                Matrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0)),
            )
            .unwrap();
            let h = HybridZonotope::from_zonotope(&z);
            for d in directions(3, 10) {
                assert!((support(&h, &d).unwrap() - z.support(&d)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matrix_zonotope_membership() {
        let m = MatrixZonotope::new(
            Matrix::from_row_slice(1, 2, &[0.5, 1.0]),
            vec![Matrix::from_row_slice(1, 2, &[0.1, 0.0])],
        )
        .unwrap();
        assert!(matrix_zonotope_contains(&m, &Matrix::from_row_slice(1, 2, &[0.55, 1.0]), 1e-9).unwrap());
        assert!(!matrix_zonotope_contains(&m, &Matrix::from_row_slice(1, 2, &[0.7, 1.0]), 1e-9).unwrap());
        assert!(!matrix_zonotope_contains(&m, &Matrix::from_row_slice(1, 2, &[0.5, 1.1]), 1e-9).unwrap());
    }
}
