//! Set representations and closed-form hybrid zonotope operations.
//!
//! A hybrid zonotope is the set
//!
//! ```text
//! { c + Gc ξc + Gb ξb  :  ξc ∈ [-1,1]^ng, ξb ∈ {-1,1}^nb, Ac ξc + Ab ξb = b }
//! ```
//!
//! Every operation here is total: it returns a syntactic representation and never
//! decides emptiness. Semantic queries (membership, support, emptiness) live in
//! [`crate::oracle`].

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{abs, block_diag, hstack, vcat, vstack, Matrix, Vector};
use crate::oracle::{self, Hull};

/// Absolute tolerance for floating comparisons inside set operations.
pub const SET_TOL: f64 = 1e-9;

/// `⟨center, generators⟩ = { center + G ξ : ξ ∈ [-1,1]^g }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "doc::ZonotopeDoc", into = "doc::ZonotopeDoc")]
pub struct Zonotope {
    center: Vector,
    generators: Matrix,
}

impl Zonotope {
    pub fn new(center: Vector, generators: Matrix) -> Result<Self> {
        check_dim("zonotope generators", center.len(), generators.nrows())?;
        Ok(Self { center, generators })
    }

    pub fn point(center: Vector) -> Self {
        let n = center.len();
        Self {
            center,
            generators: Matrix::zeros(n, 0),
        }
    }

    /// Axis-aligned box `center ± radius`.
    pub fn from_box(center: Vector, radius: &Vector) -> Result<Self> {
        check_dim("box radius", center.len(), radius.len())?;
        Ok(Self {
            center,
            generators: Matrix::from_diagonal(radius),
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn generators(&self) -> &Matrix {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    /// `h(Z, d) = dᵀc + Σ|dᵀgᵢ|`.
    pub fn support(&self, d: &Vector) -> f64 {
        self.center.dot(d) + (self.generators.transpose() * d).abs().sum()
    }

    /// Half-widths of the interval hull.
    pub fn radius(&self) -> Vector {
        abs(&self.generators).column_sum()
    }

    pub fn linear_map(&self, m: &Matrix) -> Result<Self> {
        check_dim("zonotope linear map", self.dim(), m.ncols())?;
        Ok(Self {
            center: m * &self.center,
            generators: m * &self.generators,
        })
    }

    /// Maps a factor vector `ξ ∈ [-1,1]^g` to the corresponding point.
    pub fn point_at(&self, factors: &Vector) -> Vector {
        &self.center + &self.generators * factors
    }
}

/// Hybrid zonotope `⟨Gc, Gb, c, Ac, Ab, b⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "doc::HybridZonotopeDoc", into = "doc::HybridZonotopeDoc")]
pub struct HybridZonotope {
    gc: Matrix,
    gb: Matrix,
    c: Vector,
    ac: Matrix,
    ab: Matrix,
    b: Vector,
}

impl HybridZonotope {
    pub fn new(gc: Matrix, gb: Matrix, c: Vector, ac: Matrix, ab: Matrix, b: Vector) -> Result<Self> {
        let n = c.len();
        check_dim("hybrid zonotope Gc rows", n, gc.nrows())?;
        check_dim("hybrid zonotope Gb rows", n, gb.nrows())?;
        check_dim("hybrid zonotope Ac rows", b.len(), ac.nrows())?;
        check_dim("hybrid zonotope Ab rows", b.len(), ab.nrows())?;
        check_dim("hybrid zonotope Ac columns", gc.ncols(), ac.ncols())?;
        check_dim("hybrid zonotope Ab columns", gb.ncols(), ab.ncols())?;
        Ok(Self { gc, gb, c, ac, ab, b })
    }

    /// Embeds a zonotope (no binary factors, no constraints).
    pub fn from_zonotope(z: &Zonotope) -> Self {
        let n = z.dim();
        let ng = z.num_generators();
        Self {
            gc: z.generators.clone(),
            gb: Matrix::zeros(n, 0),
            c: z.center.clone(),
            ac: Matrix::zeros(0, ng),
            ab: Matrix::zeros(0, 0),
            b: Vector::zeros(0),
        }
    }

    pub fn point(c: Vector) -> Self {
        Self::from_zonotope(&Zonotope::point(c))
    }

    /// A syntactically empty set: the single constraint `0 = 1`.
    pub fn empty(n: usize) -> Self {
        Self {
            gc: Matrix::zeros(n, 0),
            gb: Matrix::zeros(n, 0),
            c: Vector::zeros(n),
            ac: Matrix::zeros(1, 0),
            ab: Matrix::zeros(1, 0),
            b: Vector::from_element(1, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }
    pub fn num_cont(&self) -> usize {
        self.gc.ncols()
    }
    pub fn num_bin(&self) -> usize {
        self.gb.ncols()
    }
    pub fn num_cons(&self) -> usize {
        self.b.len()
    }
    pub fn gc(&self) -> &Matrix {
        &self.gc
    }
    pub fn gb(&self) -> &Matrix {
        &self.gb
    }
    pub fn center(&self) -> &Vector {
        &self.c
    }
    pub fn ac(&self) -> &Matrix {
        &self.ac
    }
    pub fn ab(&self) -> &Matrix {
        &self.ab
    }
    pub fn b(&self) -> &Vector {
        &self.b
    }

    /// Representation size: continuous + binary generators + constraint rows.
    pub fn complexity(&self) -> usize {
        self.num_cont() + self.num_bin() + self.num_cons()
    }

    /// Point for a given factor assignment (constraints are not checked).
    pub fn point_at(&self, cont: &Vector, bin: &Vector) -> Vector {
        &self.c + &self.gc * cont + &self.gb * bin
    }

    /// `Z1 ⊕ Z2`.
    pub fn minkowski_sum(&self, other: &Self) -> Result<Self> {
        check_dim("minkowski sum", self.dim(), other.dim())?;
        let n = self.dim();
        Ok(Self {
            gc: hstack(n, &[&self.gc, &other.gc]),
            gb: hstack(n, &[&self.gb, &other.gb]),
            c: &self.c + &other.c,
            ac: block_diag(&[&self.ac, &other.ac]),
            ab: block_diag(&[&self.ab, &other.ab]),
            b: vcat(&[&self.b, &other.b]),
        })
    }

    /// `Z1 ∩_R Z3 = { x ∈ Z1 : R x ∈ Z3 }`.
    pub fn generalized_intersection(&self, r: &Matrix, other: &Self) -> Result<Self> {
        check_dim("generalized intersection map columns", self.dim(), r.ncols())?;
        check_dim("generalized intersection map rows", other.dim(), r.nrows())?;
        let n = self.dim();
        let m = other.dim();
        let (ng1, nb1) = (self.num_cont(), self.num_bin());
        let (ng3, nb3) = (other.num_cont(), other.num_bin());
        let (nc1, nc3) = (self.num_cons(), other.num_cons());

        let mut gc = Matrix::zeros(n, ng1 + ng3);
        gc.columns_mut(0, ng1).copy_from(&self.gc);
        let mut gb = Matrix::zeros(n, nb1 + nb3);
        gb.columns_mut(0, nb1).copy_from(&self.gb);
        let rows = nc1 + nc3 + m;
        let mut ac = Matrix::zeros(rows, ng1 + ng3);
        ac.view_mut((0, 0), (nc1, ng1)).copy_from(&self.ac);
        ac.view_mut((nc1, ng1), (nc3, ng3)).copy_from(&other.ac);
        ac.view_mut((nc1 + nc3, 0), (m, ng1)).gemm(1.0, r, &self.gc, 0.0);
        ac.view_mut((nc1 + nc3, ng1), (m, ng3)).copy_from(&(-&other.gc));
        let mut ab = Matrix::zeros(rows, nb1 + nb3);
        ab.view_mut((0, 0), (nc1, nb1)).copy_from(&self.ab);
        ab.view_mut((nc1, nb1), (nc3, nb3)).copy_from(&other.ab);
        ab.view_mut((nc1 + nc3, 0), (m, nb1)).gemm(1.0, r, &self.gb, 0.0);
        ab.view_mut((nc1 + nc3, nb1), (m, nb3)).copy_from(&(-&other.gb));
        let b = vcat(&[&self.b, &other.b, &(&other.c - r * &self.c)]);
        Ok(Self {
            gc,
            gb,
            c: self.c.clone(),
            ac,
            ab,
            b,
        })
    }

    /// `Z1 ∩_R H⁻` for the halfspace `{ y : lᵀ y ≤ ρ }` pulled back through `R`.
    ///
    /// Adds one continuous slack factor scaled by `d_m / 2` and one constraint row.
    /// When `d_m < 0` no point of the unconstrained generator box reaches the
    /// halfspace; the slack coefficient is clamped to zero so the new row becomes an
    /// unsatisfiable hyperplane constraint.
    pub fn halfspace_intersection(&self, h: &Halfspace) -> Result<Self> {
        let row = h.pulled_back_normal(self.dim())?;
        let n = self.dim();
        let (ng, nc) = (self.num_cont(), self.num_cons());
        let lg = &row * &self.gc;
        let lb = &row * &self.gb;
        let lc = (&row * &self.c)[0];
        let dm = h.offset - lc + lg.abs().sum() + lb.abs().sum();
        let half = 0.5 * dm.max(0.0);

        let gc = hstack(n, &[&self.gc, &Matrix::zeros(n, 1)]);
        let mut ac = Matrix::zeros(nc + 1, ng + 1);
        ac.view_mut((0, 0), (nc, ng)).copy_from(&self.ac);
        ac.view_mut((nc, 0), (1, ng)).copy_from(&lg);
        ac[(nc, ng)] = half;
        let ab = vstack(self.num_bin(), &[&self.ab, &lb]);
        let b = vcat(&[&self.b, &Vector::from_element(1, h.offset - lc - half)]);
        Ok(Self {
            gc,
            gb: self.gb.clone(),
            c: self.c.clone(),
            ac,
            ab,
            b,
        })
    }

    /// `{ M x : x ∈ Z }`.
    pub fn linear_map(&self, m: &Matrix) -> Result<Self> {
        check_dim("linear map", self.dim(), m.ncols())?;
        Ok(Self {
            gc: m * &self.gc,
            gb: m * &self.gb,
            c: m * &self.c,
            ac: self.ac.clone(),
            ab: self.ab.clone(),
            b: self.b.clone(),
        })
    }

    pub fn translate(&self, v: &Vector) -> Result<Self> {
        check_dim("translate", self.dim(), v.len())?;
        let mut out = self.clone();
        out.c += v;
        Ok(out)
    }

    /// `Z1 × Z2`.
    pub fn cartesian_product(&self, other: &Self) -> Self {
        Self {
            gc: block_diag(&[&self.gc, &other.gc]),
            gb: block_diag(&[&self.gb, &other.gb]),
            c: vcat(&[&self.c, &other.c]),
            ac: block_diag(&[&self.ac, &other.ac]),
            ab: block_diag(&[&self.ab, &other.ab]),
            b: vcat(&[&self.b, &other.b]),
        }
    }

    /// Exact union `Z1 ∪ Z2` with one fresh binary selector `σ`.
    ///
    /// `σ = -1` selects `Z1`, `σ = +1` selects `Z2`. With `s₁ = (1-σ)/2` and
    /// `s₂ = (1+σ)/2`, the factors of a deselected operand are pinned to the
    /// all-`-1` corner by a single switching row
    ///
    /// ```text
    /// Σ ξc + Σ ξb + K τ = -2K (1 - sᵢ),   τ ∈ [-1,1],   K = ngᵢ + nbᵢ
    /// ```
    ///
    /// and its center, generators and constraint right-hand side are compensated
    /// so that the pinned corner contributes nothing. A selected operand's
    /// switching row is slack for any factor values.
    pub fn union(&self, other: &Self) -> Result<Self> {
        check_dim("union", self.dim(), other.dim())?;
        let n = self.dim();
        let parts = [self, other];
        // branch 1 carries sign -1 on σ in s₁, branch 2 carries +1.
        let signs = [-1.0, 1.0];

        let ng: usize = parts.iter().map(|p| p.num_cont()).sum();
        let nb: usize = parts.iter().map(|p| p.num_bin()).sum();
        let nc: usize = parts.iter().map(|p| p.num_cons()).sum();
        let switched: Vec<usize> = parts
            .iter()
            .map(|p| usize::from(p.num_cont() + p.num_bin() > 0))
            .collect();
        let n_slack: usize = switched.iter().sum();

        let total_cont = ng + n_slack;
        let total_bin = nb + 1;
        let total_rows = nc + n_slack;
        let sigma_col = nb;

        let mut gc = Matrix::zeros(n, total_cont);
        let mut gb = Matrix::zeros(n, total_bin);
        let mut c = Vector::zeros(n);
        let mut ac = Matrix::zeros(total_rows, total_cont);
        let mut ab = Matrix::zeros(total_rows, total_bin);
        let mut b = Vector::zeros(total_rows);

        let (mut col_c, mut col_b, mut row) = (0, 0, 0);
        let mut slack_col = ng;
        let mut switch_row = nc;
        for (k, part) in parts.iter().enumerate() {
            let s = signs[k];
            let (pg, pb, pc) = (part.num_cont(), part.num_bin(), part.num_cons());
            // h = G 1 : the offset produced by the pinned corner.
            let h = part.gc.column_sum() + part.gb.column_sum();
            // x-contribution: sᵢ cᵢ + (1 - sᵢ) hᵢ + Gc ξc + Gb ξb
            c += (&part.c + &h) * 0.5;
            let sig_x = (&part.c - &h) * (0.5 * s);
            let mut sig_col = gb.column_mut(sigma_col);
            sig_col += &sig_x;

            gc.view_mut((0, col_c), (n, pg)).copy_from(&part.gc);
            gb.view_mut((0, col_b), (n, pb)).copy_from(&part.gb);

            // Constraints: Ac ξc + Ab ξb = sᵢ bᵢ - (1 - sᵢ) aᵢ, a = A 1.
            let a = part.ac.column_sum() + part.ab.column_sum();
            ac.view_mut((row, col_c), (pc, pg)).copy_from(&part.ac);
            ab.view_mut((row, col_b), (pc, pb)).copy_from(&part.ab);
            let e = &part.b + &a;
            for i in 0..pc {
                ab[(row + i, sigma_col)] = -0.5 * s * e[i];
                b[row + i] = 0.5 * (part.b[i] - a[i]);
            }

            if switched[k] == 1 {
                let kk = (pg + pb) as f64;
                for j in 0..pg {
                    ac[(switch_row, col_c + j)] = 1.0;
                }
                for j in 0..pb {
                    ab[(switch_row, col_b + j)] = 1.0;
                }
                ac[(switch_row, slack_col)] = kk;
                // -2K(1 - sᵢ) = -K(1 - s·σ) with s = -1 for branch 1, +1 for branch 2
                ab[(switch_row, sigma_col)] = -s * kk;
                b[switch_row] = -kk;
                slack_col += 1;
                switch_row += 1;
            }

            col_c += pg;
            col_b += pb;
            row += pc;
        }

        Ok(Self {
            gc,
            gb,
            c,
            ac,
            ab,
            b,
        })
    }

    /// Left fold of [`HybridZonotope::union`] over a non-empty list.
    pub fn union_all<'a, I>(sets: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Self>,
    {
        let mut iter = sets.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidInput("union of an empty list".into()))?;
        iter.try_fold(first.clone(), |acc, z| acc.union(z))
    }
}

/// `⟨C, {G_j}⟩ = { C + Σ β_j G_j : β ∈ [-1,1] }` in matrix space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "doc::MatrixZonotopeDoc", into = "doc::MatrixZonotopeDoc")]
pub struct MatrixZonotope {
    center: Matrix,
    generators: Vec<Matrix>,
}

impl MatrixZonotope {
    pub fn new(center: Matrix, generators: Vec<Matrix>) -> Result<Self> {
        for g in &generators {
            if g.shape() != center.shape() {
                return Err(Error::InvalidInput(format!(
                    "matrix zonotope generator has shape {:?}, center has {:?}",
                    g.shape(),
                    center.shape()
                )));
            }
        }
        Ok(Self { center, generators })
    }

    pub fn point(center: Matrix) -> Self {
        Self {
            center,
            generators: Vec::new(),
        }
    }

    pub fn center(&self) -> &Matrix {
        &self.center
    }

    pub fn generators(&self) -> &[Matrix] {
        &self.generators
    }

    pub fn shape(&self) -> (usize, usize) {
        self.center.shape()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    /// `X − M = ⟨X − C, {−G_j}⟩`.
    pub fn subtract_from(&self, x: &Matrix) -> Result<Self> {
        if x.shape() != self.center.shape() {
            return Err(Error::InvalidInput(format!(
                "cannot subtract a {:?} matrix zonotope from a {:?} matrix",
                self.center.shape(),
                x.shape()
            )));
        }
        Ok(Self {
            center: x - &self.center,
            generators: self.generators.iter().map(|g| -g).collect(),
        })
    }

    /// `M · P` for a real matrix `P` on the right.
    pub fn mul_right(&self, p: &Matrix) -> Result<Self> {
        check_dim("matrix zonotope right product", self.center.ncols(), p.nrows())?;
        Ok(Self {
            center: &self.center * p,
            generators: self.generators.iter().map(|g| g * p).collect(),
        })
    }

    /// Sum of the absolute generators, `Σ_j |G_j|`.
    pub fn abs_generator_sum(&self) -> Matrix {
        let (r, c) = self.shape();
        self.generators
            .iter()
            .fold(Matrix::zeros(r, c), |acc, g| acc + abs(g))
    }

    /// Scales every generator by `factor`.
    pub fn scale_generators(&self, factor: f64) -> Self {
        Self {
            center: self.center.clone(),
            generators: self.generators.iter().map(|g| g * factor).collect(),
        }
    }

    /// Matrix for a given factor vector `β`.
    pub fn matrix_at(&self, beta: &[f64]) -> Matrix {
        self.generators
            .iter()
            .zip(beta)
            .fold(self.center.clone(), |acc, (g, b)| acc + g * *b)
    }
}

/// Sound over-approximation of `{ A x : A ∈ M, x ∈ Z }`.
///
/// The center matrix is applied exactly, which keeps the hybrid structure of `Z`.
/// Each generator contributes `β_j G_j x` with `x` in the interval hull `m ± r`
/// of `Z`, bounded by the symmetric box of radius `|G_j| (|m| + r)`; these boxes
/// are summed into one axis-aligned box.
pub fn matzono_times_set(m: &MatrixZonotope, z: &HybridZonotope) -> Result<HybridZonotope> {
    check_dim("matrix zonotope times set", z.dim(), m.center.ncols())?;
    let mapped = z.linear_map(&m.center)?;
    if m.generators.is_empty() {
        return Ok(mapped);
    }
    match oracle::interval_hull(z)? {
        Some(h) => matzono_times_set_in_hull(m, z, &h),
        None => Ok(mapped),
    }
}

/// As [`matzono_times_set`] with the interval hull of `z` supplied by the caller.
pub fn matzono_times_set_in_hull(m: &MatrixZonotope, z: &HybridZonotope, hull: &Hull) -> Result<HybridZonotope> {
    check_dim("matrix zonotope times set", z.dim(), m.center.ncols())?;
    check_dim("interval hull", z.dim(), hull.lower.len())?;
    let mapped = z.linear_map(&m.center)?;
    if m.generators.is_empty() {
        return Ok(mapped);
    }
    let reach = hull.midpoint().abs() + hull.radius();
    let radius = m.abs_generator_sum() * reach;
    let rows = m.center.nrows();
    let active: Vec<usize> = (0..rows).filter(|&i| radius[i] > 0.0).collect();
    let mut gens = Matrix::zeros(rows, active.len());
    for (k, &i) in active.iter().enumerate() {
        gens[(i, k)] = radius[i];
    }
    let bx = Zonotope::new(Vector::zeros(rows), gens)?;
    mapped.minkowski_sum(&HybridZonotope::from_zonotope(&bx))
}

/// `{ y ∈ R^m : lᵀ y ≤ ρ }`, optionally pulled back through a map `R` so that it
/// constrains `x` via `lᵀ R x ≤ ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "doc::HalfspaceDoc", into = "doc::HalfspaceDoc")]
pub struct Halfspace {
    normal: Vector,
    offset: f64,
    map: Option<Matrix>,
}

impl Halfspace {
    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        if normal.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidInput("halfspace normal is zero".into()));
        }
        Ok(Self {
            normal,
            offset,
            map: None,
        })
    }

    pub fn with_map(normal: Vector, offset: f64, map: Matrix) -> Result<Self> {
        check_dim("halfspace map rows", normal.len(), map.nrows())?;
        let mut h = Self::new(normal, offset)?;
        h.map = Some(map);
        Ok(h)
    }

    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn map(&self) -> Option<&Matrix> {
        self.map.as_ref()
    }

    /// Row vector `lᵀ R` acting on an `n`-dimensional space.
    fn pulled_back_normal(&self, n: usize) -> Result<Matrix> {
        match &self.map {
            Some(r) => {
                check_dim("halfspace map columns", n, r.ncols())?;
                let row = self.normal.transpose() * r;
                Ok(Matrix::from_row_slice(1, n, row.as_slice()))
            }
            None => {
                check_dim("halfspace normal", n, self.normal.len())?;
                Ok(Matrix::from_row_slice(1, n, self.normal.as_slice()))
            }
        }
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        let y = match &self.map {
            Some(r) => r * x,
            None => x.clone(),
        };
        self.normal.dot(&y) <= self.offset + tol
    }
}

/// Polyhedral region `{ x : L x ≤ ρ }`; an empty `L` is the whole space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "doc::RegionDoc", into = "doc::RegionDoc")]
pub struct PolyhedralRegion {
    l: Matrix,
    rho: Vector,
}

impl PolyhedralRegion {
    pub fn new(l: Matrix, rho: Vector) -> Result<Self> {
        check_dim("region rows", l.nrows(), rho.len())?;
        for i in 0..l.nrows() {
            if l.row(i).iter().all(|v| *v == 0.0) {
                return Err(Error::InvalidInput(format!("region row {i} is zero")));
            }
        }
        Ok(Self { l, rho })
    }

    /// The whole space `R^n`.
    pub fn universe(n: usize) -> Self {
        Self {
            l: Matrix::zeros(0, n),
            rho: Vector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.l.ncols()
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn rho(&self) -> &Vector {
        &self.rho
    }

    pub fn num_rows(&self) -> usize {
        self.rho.len()
    }

    pub fn halfspaces(&self) -> impl Iterator<Item = Halfspace> + '_ {
        (0..self.num_rows()).map(move |j| Halfspace {
            normal: self.l.row(j).transpose(),
            offset: self.rho[j],
            map: None,
        })
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        (&self.l * x - &self.rho).iter().all(|v| *v <= tol)
    }
}

/// JSON document shapes: matrices are row-major nested arrays.
pub mod doc {
    use super::*;

    pub type Rows = Vec<Vec<f64>>;

    pub fn to_rows(m: &Matrix) -> Rows {
        (0..m.nrows())
            .map(|i| m.row(i).iter().cloned().collect())
            .collect()
    }

    /// Rebuilds a matrix with a known shape. An empty row list is accepted for any
    /// shape with zero rows, and rows of length zero for zero columns.
    pub fn from_rows(what: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<Matrix> {
        if rows.len() != nrows {
            return Err(Error::InvalidInput(format!(
                "{what}: expected {nrows} rows, found {}",
                rows.len()
            )));
        }
        let mut m = Matrix::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::InvalidInput(format!(
                    "{what}: row {i} has {} entries, expected {ncols}",
                    r.len()
                )));
            }
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    /// Column count of a row list, or `None` when it has no rows.
    pub fn width(rows: &Rows) -> Option<usize> {
        rows.first().map(|r| r.len())
    }

    pub fn matrix_from_rows(what: &str, rows: &Rows) -> Result<Matrix> {
        let ncols = width(rows).unwrap_or(0);
        from_rows(what, rows, rows.len(), ncols)
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ZonotopeDoc {
        pub center: Vec<f64>,
        pub generators: Rows,
    }

    impl From<Zonotope> for ZonotopeDoc {
        fn from(z: Zonotope) -> Self {
            Self {
                center: z.center.iter().cloned().collect(),
                generators: to_rows(&z.generators),
            }
        }
    }

    impl TryFrom<ZonotopeDoc> for Zonotope {
        type Error = Error;
        fn try_from(d: ZonotopeDoc) -> Result<Self> {
            let n = d.center.len();
            let g = width(&d.generators).unwrap_or(0);
            Zonotope::new(
                Vector::from_vec(d.center),
                from_rows("generators", &d.generators, n, g)?,
            )
        }
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct HybridZonotopeDoc {
        pub center: Vec<f64>,
        pub gc: Rows,
        pub gb: Rows,
        pub ac: Rows,
        pub ab: Rows,
        pub b: Vec<f64>,
        /// Generator counts, needed when the set has zero dimension or when
        /// constraint matrices have zero rows.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub ng: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub nb: Option<usize>,
    }

    impl From<HybridZonotope> for HybridZonotopeDoc {
        fn from(z: HybridZonotope) -> Self {
            Self {
                center: z.c.iter().cloned().collect(),
                gc: to_rows(&z.gc),
                gb: to_rows(&z.gb),
                ac: to_rows(&z.ac),
                ab: to_rows(&z.ab),
                b: z.b.iter().cloned().collect(),
                ng: Some(z.gc.ncols()),
                nb: Some(z.gb.ncols()),
            }
        }
    }

    impl TryFrom<HybridZonotopeDoc> for HybridZonotope {
        type Error = Error;
        fn try_from(d: HybridZonotopeDoc) -> Result<Self> {
            let n = d.center.len();
            let nc = d.b.len();
            let ng = d
                .ng
                .or_else(|| width(&d.gc))
                .or_else(|| width(&d.ac))
                .unwrap_or(0);
            let nb = d
                .nb
                .or_else(|| width(&d.gb))
                .or_else(|| width(&d.ab))
                .unwrap_or(0);
            HybridZonotope::new(
                from_rows("gc", &d.gc, n, ng)?,
                from_rows("gb", &d.gb, n, nb)?,
                Vector::from_vec(d.center),
                from_rows("ac", &d.ac, nc, ng)?,
                from_rows("ab", &d.ab, nc, nb)?,
                Vector::from_vec(d.b),
            )
        }
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct MatrixZonotopeDoc {
        pub center: Rows,
        pub generators: Vec<Rows>,
    }

    impl From<MatrixZonotope> for MatrixZonotopeDoc {
        fn from(m: MatrixZonotope) -> Self {
            Self {
                center: to_rows(&m.center),
                generators: m.generators.iter().map(to_rows).collect(),
            }
        }
    }

    impl TryFrom<MatrixZonotopeDoc> for MatrixZonotope {
        type Error = Error;
        fn try_from(d: MatrixZonotopeDoc) -> Result<Self> {
            let center = matrix_from_rows("center", &d.center)?;
            let (r, c) = center.shape();
            let generators = d
                .generators
                .iter()
                .map(|g| from_rows("generator", g, r, c))
                .collect::<Result<Vec<_>>>()?;
            MatrixZonotope::new(center, generators)
        }
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct HalfspaceDoc {
        pub normal: Vec<f64>,
        pub offset: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub map: Option<Rows>,
    }

    impl From<Halfspace> for HalfspaceDoc {
        fn from(h: Halfspace) -> Self {
            Self {
                normal: h.normal.iter().cloned().collect(),
                offset: h.offset,
                map: h.map.as_ref().map(to_rows),
            }
        }
    }

    impl TryFrom<HalfspaceDoc> for Halfspace {
        type Error = Error;
        fn try_from(d: HalfspaceDoc) -> Result<Self> {
            let normal = Vector::from_vec(d.normal);
            match d.map {
                Some(rows) => {
                    let m = matrix_from_rows("map", &rows)?;
                    Halfspace::with_map(normal, d.offset, m)
                }
                None => Halfspace::new(normal, d.offset),
            }
        }
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct RegionDoc {
        #[serde(rename = "L")]
        pub l: Rows,
        pub rho: Vec<f64>,
        /// State dimension; required when the region has no rows.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub dim: Option<usize>,
    }

    impl From<PolyhedralRegion> for RegionDoc {
        fn from(r: PolyhedralRegion) -> Self {
            Self {
                l: to_rows(&r.l),
                rho: r.rho.iter().cloned().collect(),
                dim: Some(r.l.ncols()),
            }
        }
    }

    impl TryFrom<RegionDoc> for PolyhedralRegion {
        type Error = Error;
        fn try_from(d: RegionDoc) -> Result<Self> {
            let n = d.dim.or_else(|| width(&d.l)).unwrap_or(0);
            let l = from_rows("L", &d.l, d.rho.len(), n)?;
            PolyhedralRegion::new(l, Vector::from_vec(d.rho))
        }
    }
}
