//! Dense block assembly and SVD-based helpers shared by the set and identification code.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Horizontally concatenates blocks that share a row count.
pub fn hstack(rows: usize, blocks: &[&Matrix]) -> Matrix {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Vertically concatenates blocks that share a column count.
pub fn vstack(cols: usize, blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(*b);
        at += b.nrows();
    }
    out
}

pub fn vcat(parts: &[&Vector]) -> Vector {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = Vector::zeros(len);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(*p);
        at += p.len();
    }
    out
}

/// Block-diagonal matrix; blocks may have zero rows or columns.
pub fn block_diag(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Singular value decomposition of a `p × n` matrix with the singular triplets
/// sorted in decreasing order and an orthonormal basis of the null space.
#[derive(Debug, Clone)]
pub struct SvdSplit {
    /// Left singular vectors of the nonzero singular values (`p × r`).
    pub left: Matrix,
    /// Nonzero singular values, decreasing.
    pub sigma: Vector,
    /// Right singular vectors spanning the row space (`n × r`).
    pub range: Matrix,
    /// Right singular vectors spanning the null space (`n × (n − r)`).
    pub null: Matrix,
}

impl SvdSplit {
    /// `rel_tol` is relative to the largest singular value.
    pub fn new(m: &Matrix, rel_tol: f64) -> Self {
        let (p, n) = m.shape();
        // Pad to at least n rows so that V is square and carries the null space.
        let rows = p.max(n);
        let mut padded = Matrix::zeros(rows, n);
        padded.view_mut((0, 0), (p, n)).copy_from(m);
        if n == 0 {
            return Self {
                left: Matrix::zeros(p, 0),
                sigma: Vector::zeros(0),
                range: Matrix::zeros(0, 0),
                null: Matrix::zeros(0, 0),
            };
        }
        let svd = padded.svd(true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let smax = order
            .first()
            .map(|&i| svd.singular_values[i])
            .unwrap_or(0.0);
        let cutoff = rel_tol * smax;
        let rank = order
            .iter()
            .filter(|&&i| smax > 0.0 && svd.singular_values[i] > cutoff)
            .count();

        let mut left = Matrix::zeros(p, rank);
        let mut sigma = Vector::zeros(rank);
        let mut range = Matrix::zeros(n, rank);
        for (k, &i) in order.iter().take(rank).enumerate() {
            sigma[k] = svd.singular_values[i];
            left.column_mut(k).copy_from(&u.column(i).rows(0, p));
            range.column_mut(k).copy_from(&v_t.row(i).transpose());
        }
        let mut null = Matrix::zeros(n, n - rank);
        for (k, &i) in order.iter().skip(rank).take(n - rank).enumerate() {
            null.column_mut(k).copy_from(&v_t.row(i).transpose());
        }
        Self {
            left,
            sigma,
            range,
            null,
        }
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Moore–Penrose pseudoinverse `V₁ Σ⁻¹ P₁ᵀ`.
    pub fn pinv(&self) -> Matrix {
        let mut scaled = self.range.clone();
        for (k, s) in self.sigma.iter().enumerate() {
            scaled.column_mut(k).scale_mut(1.0 / s);
        }
        scaled * self.left.transpose()
    }
}

/// Moore–Penrose pseudoinverse with singular values below `rel_tol · σ_max` dropped.
pub fn pinv(m: &Matrix, rel_tol: f64) -> Matrix {
    SvdSplit::new(m, rel_tol).pinv()
}

/// Numerical rank with singular values below `rel_tol · σ_max` treated as zero.
pub fn rank(m: &Matrix, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Componentwise absolute value.
pub fn abs(m: &Matrix) -> Matrix {
    m.map(f64::abs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_split_of_wide_matrix_has_null_space() {
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let s = SvdSplit::new(&c, 1e-10);
        assert_eq!(s.rank(), 1);
        assert_eq!(s.null.ncols(), 1);
        assert!((s.null[(0, 0)]).abs() < 1e-12);
        assert!((s.null[(1, 0)].abs() - 1.0).abs() < 1e-12);
        let p = s.pinv();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12 && p[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn pinv_of_tall_matrix_is_left_inverse() {
        let c = Matrix::from_row_slice(3, 2, &[1.0, 0.4, 0.9, -1.2, 0.0, 0.7]);
        let p = pinv(&c, 1e-10);
        let id = &p * &c;
        assert!((id - Matrix::identity(2, 2)).abs().max() < 1e-12);
        assert_eq!(rank(&c, 1e-8), 2);
    }

    #[test]
    fn block_helpers_accept_empty_blocks() {
        let a = Matrix::from_element(2, 1, 1.0);
        let e = Matrix::zeros(0, 0);
        let d = block_diag(&[&a, &e, &a]);
        assert_eq!(d.shape(), (4, 2));
        assert_eq!(hstack(2, &[&a, &Matrix::zeros(2, 0)]).shape(), (2, 1));
        assert_eq!(vstack(1, &[&a, &Matrix::zeros(0, 1)]).shape(), (2, 1));
    }
}
