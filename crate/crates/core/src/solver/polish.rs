//! Active-set polishing of an approximate minimizer.
//!
//! Given a guess `Lambda` for the cosupport of the optimum, the optimum of
//! the equality-constrained problem is the point of `{omega_Lambda z = 0,
//! M z = y}` nearest the current iterate. For the noise-ball problem the
//! optimum on the face `ker omega_Lambda` minimizes a linear function over
//! an ellipsoid, which has a closed form. Either way the result is only
//! accepted after it passes the certificate.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{null_space, select_rows, vstack};

use super::certify::{pinned_direction, SupportSplit};

/// Cosupport guesses from an iterate: coefficients below several relative
/// thresholds, deduplicated, smallest set first.
pub(crate) fn cosupport_candidates(coeffs: &DVector<f64>) -> Vec<Vec<usize>> {
    let top = coeffs.amax();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for rel in [1e-6, 1e-4, 1e-3, 1e-2] {
        let cut = rel * top;
        let set: Vec<usize> = (0..coeffs.len()).filter(|&i| coeffs[i].abs() <= cut).collect();
        if !out.contains(&set) {
            out.push(set);
        }
    }
    out
}

/// Nearest point to `z` with `omega_Lambda z = 0` and `M z = y`, if that
/// system is consistent.
pub(crate) fn polish_equality(
    omega: &DMatrix<f64>,
    m: &DMatrix<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    cosupport: &[usize],
    tol_feas: f64,
) -> Option<DVector<f64>> {
    let omega_l = select_rows(omega, cosupport);
    let system = vstack(&omega_l, m);
    let mut rhs = DVector::zeros(system.nrows());
    let lam = cosupport.len();
    rhs.rows_mut(0, lam).copy_from(&(-(&omega_l * z)));
    rhs.rows_mut(lam, m.nrows()).copy_from(&(y - m * z));
    let svd = system.svd(true, true);
    let top = svd.singular_values.max();
    if top == 0.0 {
        return None;
    }
    let delta = svd.solve(&rhs, 1e-12 * top).ok()?;
    let candidate = z + delta;
    let scale = (omega * &candidate).amax().max(f64::MIN_POSITIVE);
    let annihilated = (&omega_l * &candidate).amax() <= 1e-10 * scale;
    let feasible = (m * &candidate - y).norm() <= tol_feas;
    (annihilated && feasible).then_some(candidate)
}

/// Optimum of `min <g, c>` over `||M B c - y|| <= eta` where `B` spans
/// `ker omega_Lambda` and `g = B^T omega_S^T sgn_S`.
pub(crate) fn polish_ball(
    omega: &DMatrix<f64>,
    m: &DMatrix<f64>,
    y: &DVector<f64>,
    eta: f64,
    split: &SupportSplit,
) -> Option<DVector<f64>> {
    let basis = null_space(&select_rows(omega, &split.zeros), 1e-10);
    let k = basis.ncols();
    if k == 0 || k > m.nrows() {
        return None;
    }
    let a = m * &basis;
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let top = sv.max();
    if top == 0.0 || sv.min() <= 1e-10 * top {
        return None;
    }
    let c0 = svd.solve(y, 0.0).ok()?;
    let perp = (y - &a * &c0).norm_squared();
    let radius_sq = eta * eta - perp;
    if radius_sq <= 0.0 {
        return None;
    }
    let g = basis.tr_mul(&pinned_direction(omega, split));
    let gram = a.tr_mul(&a);
    let h = gram.cholesky()?.solve(&g);
    let curvature = g.dot(&h);
    let c = if curvature > 0.0 {
        c0 - h * (radius_sq.sqrt() / curvature.sqrt())
    } else {
        c0
    };
    Some(basis * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidates_are_nested_and_unique() {
        let c = DVector::from_vec(vec![1.0, 1e-8, 5e-4, 5e-3, 0.5]);
        let cands = cosupport_candidates(&c);
        assert_eq!(cands, vec![vec![1], vec![1, 2], vec![1, 2, 3]]);
    }

    #[test]
    fn equality_polish_recovers_vertex() {
        let omega = DMatrix::<f64>::identity(2, 2);
        let m = DMatrix::from_row_slice(1, 2, &[2.0, 1.0]);
        let y = DVector::from_vec(vec![2.0]);
        let z = DVector::from_vec(vec![0.999, 0.002]);
        let p = polish_equality(&omega, &m, &y, &z, &[1], 1e-12).unwrap();
        assert!((p - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn inconsistent_cosupport_is_rejected() {
        let omega = DMatrix::<f64>::identity(2, 2);
        let m = DMatrix::from_row_slice(1, 2, &[2.0, 1.0]);
        let y = DVector::from_vec(vec![2.0]);
        let z = DVector::from_vec(vec![1.0, 0.0]);
        assert!(polish_equality(&omega, &m, &y, &z, &[0, 1], 1e-12).is_none());
    }
}
