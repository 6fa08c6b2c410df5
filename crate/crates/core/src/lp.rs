//! Dense bounded-variable primal simplex for small equality-constrained LPs.
//!
//! Problems have the form `A x = b`, `lo ≤ x ≤ hi` with finite bounds. Phase 1
//! minimizes the sum of artificial variables; the resulting feasible basis can be
//! reused for any number of phase-2 objectives.

use crate::linalg::{Matrix, Vector};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 40;

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub a: Matrix,
    pub b: Vector,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl LpProblem {
    pub fn new(a: Matrix, b: Vector, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(a.nrows(), b.len());
        debug_assert_eq!(a.ncols(), lo.len());
        debug_assert_eq!(a.ncols(), hi.len());
        Self { a, b, lo, hi }
    }

    /// Box `[-1, 1]^n` with equality constraints.
    pub fn unit_box(a: Matrix, b: Vector) -> Self {
        let n = a.ncols();
        Self::new(a, b, vec![-1.0; n], vec![1.0; n])
    }

    pub fn num_vars(&self) -> usize {
        self.a.ncols()
    }

    /// Feasibility tolerance on the phase-1 residual, scaled by the data.
    pub fn default_tol(&self) -> f64 {
        let scale = 1.0 + self.b.amax();
        1e-9 * scale * (self.b.len().max(1) as f64)
    }
}

#[derive(Debug, Clone)]
struct Tableau {
    m: usize,
    /// Number of structural columns; artificials follow.
    n: usize,
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
}

/// Outcome of a phase-1 solve.
#[derive(Debug, Clone)]
pub struct Phase1 {
    /// Minimal `Σ |A x − b|` over the box (sum of artificials at optimum).
    pub residual: f64,
    /// Minimizer of the residual.
    pub x: Vec<f64>,
    tableau: Tableau,
}

/// A basis that is feasible for `A x = b` within the phase-1 tolerance.
#[derive(Debug, Clone)]
pub struct FeasibleBasis {
    tableau: Tableau,
}

impl Tableau {
    fn build(p: &LpProblem) -> Self {
        let m = p.a.nrows();
        let n = p.a.ncols();
        let width = n + m;
        let mut t = vec![0.0; m * width];
        let mut xb = vec![0.0; m];
        let mut lo = p.lo.clone();
        let mut hi = p.hi.clone();
        lo.extend(std::iter::repeat(0.0).take(m));
        hi.extend(std::iter::repeat(f64::INFINITY).take(m));
        for i in 0..m {
            let mut r = p.b[i];
            for j in 0..n {
                r -= p.a[(i, j)] * p.lo[j];
            }
            let sign = if r < 0.0 { -1.0 } else { 1.0 };
            let row = &mut t[i * width..(i + 1) * width];
            for j in 0..n {
                row[j] = sign * p.a[(i, j)];
            }
            row[n + i] = 1.0;
            xb[i] = sign * r;
        }
        let mut is_basic = vec![false; width];
        for i in 0..m {
            is_basic[n + i] = true;
        }
        Self {
            m,
            n,
            width,
            t,
            basis: (n..n + m).collect(),
            xb,
            lo,
            hi,
            at_upper: vec![false; width],
            is_basic,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.hi[j]
        } else {
            self.lo[j]
        }
    }

    /// Reduced costs `d = c − c_Bᵀ T` for a minimization objective over all columns.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.width..(i + 1) * self.width];
                for (dj, tij) in d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        d
    }

    /// Runs primal simplex iterations for `min costᵀ x`. Returns false when the
    /// iteration limit is hit.
    fn optimize(&mut self, cost: &[f64]) -> bool {
        let mut d = self.reduced_costs(cost);
        let max_iter = 50 * (self.m + self.width) + 1000;
        let mut stall = 0usize;
        for _ in 0..max_iter {
            let bland = stall > STALL_LIMIT;
            // Pricing.
            let mut enter = None;
            let mut best = 0.0;
            for j in 0..self.width {
                if self.is_basic[j] || self.hi[j] - self.lo[j] <= 0.0 {
                    continue;
                }
                let dj = d[j];
                let gain = if !self.at_upper[j] && dj < -COST_TOL {
                    -dj
                } else if self.at_upper[j] && dj > COST_TOL {
                    dj
                } else {
                    continue;
                };
                if bland {
                    enter = Some(j);
                    break;
                }
                if gain > best {
                    best = gain;
                    enter = Some(j);
                }
            }
            let q = match enter {
                Some(q) => q,
                None => return true,
            };
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

            // Ratio test.
            let mut step = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_pivot = 0.0;
            for i in 0..self.m {
                let alpha = self.at(i, q);
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * alpha;
                let bvar = self.basis[i];
                let (limit, to_upper) = if rate < 0.0 {
                    (((self.xb[i] - self.lo[bvar]) / -rate).max(0.0), false)
                } else {
                    if !self.hi[bvar].is_finite() {
                        continue;
                    }
                    (((self.hi[bvar] - self.xb[i]) / rate).max(0.0), true)
                };
                let better = match leave {
                    None => limit < step || (limit == step && step.is_finite()),
                    Some((r, _)) => {
                        if limit < step - 1e-12 {
                            true
                        } else if limit <= step + 1e-12 {
                            if bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                alpha.abs() > leave_pivot
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = limit.min(step);
                    leave = Some((i, to_upper));
                    leave_pivot = alpha.abs();
                }
            }
            if !step.is_finite() {
                // Cannot happen with finite structural bounds.
                return false;
            }
            if step <= 1e-12 {
                stall += 1;
            } else {
                stall = 0;
            }

            for i in 0..self.m {
                let alpha = self.at(i, q);
                if alpha != 0.0 {
                    self.xb[i] -= dir * alpha * step;
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    self.at_upper[q] = !self.at_upper[q];
                }
                Some((r, to_upper)) => {
                    let entering_value = self.nonbasic_value(q) + dir * step;
                    let out = self.basis[r];
                    self.is_basic[out] = false;
                    self.at_upper[out] = to_upper;
                    self.is_basic[q] = true;
                    self.at_upper[q] = false;
                    self.basis[r] = q;
                    self.xb[r] = entering_value;
                    self.pivot(r, q, &mut d);
                }
            }
        }
        false
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let w = self.width;
        let piv = self.t[r * w + q];
        {
            let row = &mut self.t[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= piv;
            }
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for block in [before, after] {
            for row in block.chunks_mut(w) {
                let f = row[q];
                if f != 0.0 {
                    for (x, p) in row.iter_mut().zip(prow.iter()) {
                        *x -= f * p;
                    }
                    row[q] = 0.0;
                }
            }
        }
        let f = d[q];
        if f != 0.0 {
            for (x, p) in d.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            d[q] = 0.0;
        }
    }

    fn solution(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.n).map(|j| self.nonbasic_value(j)).collect();
        for (i, &bv) in self.basis.iter().enumerate() {
            if bv < self.n {
                x[bv] = self.xb[i].clamp(self.lo[bv], self.hi[bv]);
            }
        }
        x
    }

    fn artificial_sum(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(bv, _)| **bv >= self.n)
            .map(|(_, v)| v.max(0.0))
            .sum()
    }

    /// Fixes artificials at zero and pivots basic ones out where possible.
    fn retire_artificials(&mut self) {
        for j in self.n..self.width {
            self.hi[j] = 0.0;
            if !self.is_basic[j] {
                self.at_upper[j] = false;
            }
        }
        let mut dummy = vec![0.0; self.width];
        for r in 0..self.m {
            if self.basis[r] < self.n {
                continue;
            }
            let mut best = None;
            let mut best_abs = 1e-7;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let a = self.at(r, j).abs();
                if a > best_abs {
                    best_abs = a;
                    best = Some(j);
                }
            }
            if let Some(q) = best {
                // Degenerate pivot: the artificial sits at (numerically) zero.
                let out = self.basis[r];
                let value = self.nonbasic_value(q);
                let art_value = self.xb[r];
                let alpha = self.at(r, q);
                // Moving x_q by δ changes basic row r by −αδ; shift to zero it.
                let delta = art_value / alpha;
                for i in 0..self.m {
                    let a = self.at(i, q);
                    if a != 0.0 {
                        self.xb[i] -= a * delta;
                    }
                }
                self.is_basic[out] = false;
                self.at_upper[out] = false;
                self.is_basic[q] = true;
                self.at_upper[q] = false;
                self.basis[r] = q;
                self.xb[r] = value + delta;
                self.pivot(r, q, &mut dummy);
            }
        }
    }
}

/// Phase 1: minimizes the total constraint violation over the box.
pub fn phase1(p: &LpProblem) -> Phase1 {
    let mut tab = Tableau::build(p);
    let mut cost = vec![0.0; tab.width];
    for c in cost.iter_mut().skip(tab.n) {
        *c = 1.0;
    }
    tab.optimize(&cost);
    Phase1 {
        residual: tab.artificial_sum(),
        x: tab.solution(),
        tableau: tab,
    }
}

impl Phase1 {
    pub fn into_feasible(self, tol: f64) -> Option<FeasibleBasis> {
        if self.residual > tol {
            return None;
        }
        let mut tableau = self.tableau;
        tableau.retire_artificials();
        Some(FeasibleBasis { tableau })
    }
}

/// Finds a feasible basis, or `None` if the residual exceeds `tol`.
pub fn feasible_basis(p: &LpProblem, tol: f64) -> Option<FeasibleBasis> {
    phase1(p).into_feasible(tol)
}

impl FeasibleBasis {
    /// Maximizes `objᵀ x` from this basis; returns the optimal value and point.
    pub fn maximize(&self, obj: &[f64]) -> (f64, Vec<f64>) {
        let mut tab = self.tableau.clone();
        debug_assert_eq!(obj.len(), tab.n);
        let mut cost = vec![0.0; tab.width];
        for (c, o) in cost.iter_mut().zip(obj) {
            *c = -o;
        }
        tab.optimize(&cost);
        let x = tab.solution();
        let value = x.iter().zip(obj).map(|(a, b)| a * b).sum();
        (value, x)
    }

    /// A feasible point (the basic solution of the stored basis).
    pub fn point(&self) -> Vec<f64> {
        self.tableau.solution()
    }
}
