//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Singular values in non-increasing order.
pub fn singular_values(mat: &DMatrix<f64>) -> Vec<f64> {
    if mat.nrows() == 0 || mat.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = mat.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn rank(mat: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(mat);
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the kernel of `mat`.
///
/// Directions whose singular value is at most `rel_tol * sigma_max` count as
/// kernel. A zero matrix has the whole space as kernel.
pub fn null_space(mat: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (rows, cols) = mat.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    // nalgebra's SVD is thin; pad with zero rows so V is square.
    let square = if rows < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(mat);
        padded
    } else {
        mat.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let top = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let cut = rel_tol * top;
    let kernel: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| top == 0.0 || s <= cut)
        .map(|(i, _)| i)
        .collect();
    let mut basis = DMatrix::zeros(cols, kernel.len());
    for (j, &i) in kernel.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    basis
}

/// Rows of `mat` selected by `idx`, in the given order.
pub fn select_rows(mat: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), mat.ncols(), |i, j| mat[(idx[i], j)])
}

pub fn select(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Vertical concatenation `[top; bottom]`.
pub fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

pub fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn linf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Spectral norm of `[omega; m]` by power iteration on `K^T K`,
/// never touching the stacked matrix.
pub fn stacked_norm(omega: &DMatrix<f64>, m: &DMatrix<f64>, iters: usize) -> f64 {
    let d = omega.ncols();
    // Deterministic, generic start vector.
    let mut x = DVector::from_fn(d, |i, _| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_7).fract());
    x /= x.norm();
    let mut estimate = 0.0;
    for _ in 0..iters {
        let y = omega.tr_mul(&(omega * &x)) + m.tr_mul(&(m * &x));
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm.sqrt();
        x = y / norm;
    }
    estimate
}
