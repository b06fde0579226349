//! Slow reference solver: projected subgradient descent.

use nalgebra::{DMatrix, DVector};

use crate::frames::Frame;
use crate::linalg::{l1, null_space};

/// Projected subgradient method for `min ||omega z||_1` over `{M z = y}`.
///
/// Starts at the minimum-norm feasible point, steps along the normalized
/// projected subgradient with length `c / sqrt(k)` and returns the best
/// iterate seen. Intended for small instances only.
pub fn oracle_subgradient(frame: &Frame, m: &DMatrix<f64>, y: &DVector<f64>, iters: usize) -> DVector<f64> {
    let omega = frame.omega();
    let kernel = null_space(m, 1e-10);
    let svd = m.clone().svd(true, true);
    let mut z = svd.solve(y, 1e-12).expect("SVD with both factors");
    if kernel.ncols() == 0 {
        return z;
    }
    let objective = |z: &DVector<f64>| l1(&(omega * z));
    let mut best = z.clone();
    let mut best_obj = objective(&z);
    // Initial step on the scale of the start point; the feasible set is an
    // affine slice, so the distance to the optimum is of that order.
    let c = 0.5 * z.norm().max(1e-12);
    for k in 1..=iters {
        let coeffs = omega * &z;
        let sub = omega.tr_mul(&coeffs.map(f64::signum));
        let g = &kernel * kernel.tr_mul(&sub);
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        z -= g * (c / ((k as f64).sqrt() * gn));
        let obj = objective(&z);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from(&z);
        }
    }
    best
}
