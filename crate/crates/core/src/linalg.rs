//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Everything here tolerates zero-sized operands, which show up whenever a
//! player has no sequential control, no simultaneous decision or no
//! constraint rows.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn vzeros(n: usize) -> Vector {
    Vector::zeros(n)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// Builds a matrix from row-major nested rows. An empty row list is accepted
/// for any `nrows == 0` shape.
pub fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Option<Mat> {
    if rows.len() != nrows {
        return None;
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn vall_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn vmax_abs(v: &Vector) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Largest entry of `|M - Mᵀ|`.
pub fn asymmetry(m: &Mat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Unpivoted Cholesky factorization; returns the smallest pivot (diagonal
/// entry before the square root). The factorization stops at the first
/// pivot that falls to `tol` or below.
pub fn cholesky_min_pivot(m: &Mat, tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    let a = symmetrize(m);
    let mut l = zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        min_pivot = min_pivot.min(d);
        if d <= tol {
            return d;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    min_pivot
}

pub fn is_positive_definite(m: &Mat, tol: f64) -> bool {
    cholesky_min_pivot(m, tol) > tol
}

/// Smallest singular value; `+inf` for matrices without rows.
pub fn min_singular_value(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    // more rows than columns: full row rank is impossible
    if m.nrows() > m.ncols() {
        return 0.0;
    }
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Inverse through LU with partial pivoting.
pub fn inverse(m: &Mat) -> Option<Mat> {
    if m.nrows() == 0 {
        return Some(zeros(0, 0));
    }
    let inv = m.clone().lu().try_inverse()?;
    if all_finite(&inv) {
        Some(inv)
    } else {
        None
    }
}

/// Solves `A x = b` through LU with partial pivoting.
pub fn solve(a: &Mat, b: &Vector) -> Option<Vector> {
    if a.nrows() == 0 {
        return Some(vzeros(0));
    }
    let x = a.clone().lu().solve(b)?;
    if vall_finite(&x) {
        Some(x)
    } else {
        None
    }
}

/// 2-norm condition number of a symmetric matrix from its eigenvalues.
pub fn sym_condition(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = symmetrize(m).symmetric_eigen();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &e in eig.eigenvalues.iter() {
        lo = lo.min(e.abs());
        hi = hi.max(e.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn block_diag(blocks: &[Mat]) -> Mat {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), (b.nrows(), b.ncols())).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&Mat]) -> Mat {
    let c = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(r, c);
    let mut i = 0;
    for b in blocks {
        out.view_mut((i, 0), (b.nrows(), c)).copy_from(*b);
        i += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[&Mat]) -> Mat {
    let r = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(r, c);
    let mut j = 0;
    for b in blocks {
        out.view_mut((0, j), (r, b.ncols())).copy_from(*b);
        j += b.ncols();
    }
    out
}

pub fn vconcat(parts: &[&Vector]) -> Vector {
    let n: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = vzeros(n);
    let mut i = 0;
    for p in parts {
        out.rows_mut(i, p.len()).copy_from(*p);
        i += p.len();
    }
    out
}
