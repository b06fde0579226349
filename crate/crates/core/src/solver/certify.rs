//! First-order optimality certificate for analysis basis pursuit.
//!
//! A point `z` minimizes `||omega z||_1` over `{M z = y}` iff some
//! `u in subdiff ||.||_1 (omega z)` has `omega^T u in range(M^T)`. On the
//! numerical support `S` of `omega z` the entries of `u` are pinned to the
//! signs; off the support they range over `[-1, 1]`. The certificate gap is
//! the smallest achievable residual of the range condition (a bounded least
//! squares problem) plus the relative complementary-slackness defect.
//!
//! For the noise-constrained problem the range condition becomes
//! `omega^T u + mu M^T r = 0` with `r` the unit residual direction and
//! `mu >= 0` when the ball constraint is active, `mu = 0` otherwise.

use nalgebra::{DMatrix, DVector};

use crate::frames::Frame;
use crate::linalg::{l1, linf, null_space, select_rows};

/// Entries with `|(omega z)_i| <= SUPPORT_TOL * ||omega z||_inf` are zeros.
pub const SUPPORT_TOL: f64 = 1e-7;

/// Relative slack under which the noise ball constraint counts as active.
const ACTIVE_TOL: f64 = 1e-6;

const BOX_ITERS: usize = 20_000;

/// Partition of the analysis coefficients into numerical support and zeros.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SupportSplit {
    pub support: Vec<usize>,
    pub signs: Vec<f64>,
    pub zeros: Vec<usize>,
}

pub(crate) fn split_support(coeffs: &DVector<f64>) -> SupportSplit {
    let cut = SUPPORT_TOL * linf(coeffs);
    let mut split = SupportSplit {
        support: Vec::new(),
        signs: Vec::new(),
        zeros: Vec::new(),
    };
    for (i, &c) in coeffs.iter().enumerate() {
        if c.abs() > cut {
            split.support.push(i);
            split.signs.push(c.signum());
        } else {
            split.zeros.push(i);
        }
    }
    split
}

/// Optional warm start for the bounded least-squares search.
#[derive(Debug, Clone, Default)]
pub(crate) struct CertHint {
    /// Full-length dual vector for the analysis block.
    pub u: Option<DVector<f64>>,
    /// Multiplier of the noise-ball constraint.
    pub mu: Option<f64>,
}

/// Certificate gap of `z` for `min ||omega z||_1` subject to
/// `||M z - y||_2 <= eta` (`eta = 0` is the equality-constrained problem).
pub fn certify(frame: &Frame, m: &DMatrix<f64>, z: &DVector<f64>, y: &DVector<f64>, eta: f64) -> f64 {
    let kernel = if eta == 0.0 { Some(null_space(m, 1e-10)) } else { None };
    certify_with(frame, m, kernel.as_ref(), z, y, eta, &CertHint::default())
}

/// As [`certify`], reusing a precomputed kernel basis of `M` (needed only
/// when `eta == 0`).
pub(crate) fn certify_with(
    frame: &Frame,
    m: &DMatrix<f64>,
    kernel: Option<&DMatrix<f64>>,
    z: &DVector<f64>,
    y: &DVector<f64>,
    eta: f64,
    hint: &CertHint,
) -> f64 {
    let omega = frame.omega();
    let coeffs = omega * z;
    let split = split_support(&coeffs);
    let signs = DVector::from_vec(split.signs.clone());
    // Fixed part: omega_S^T sgn_S.
    let pinned = select_rows(omega, &split.support).tr_mul(&signs);
    let free_t = select_rows(omega, &split.zeros).transpose();

    let mut lo = vec![-1.0; split.zeros.len()];
    let mut hi = vec![1.0; split.zeros.len()];
    let mut start: Vec<f64> = match &hint.u {
        Some(u) => split.zeros.iter().map(|&i| u[i].clamp(-1.0, 1.0)).collect(),
        None => Vec::new(),
    };

    let residual_vec = m * z - y;
    let res_norm = residual_vec.norm();
    let mut ball_slack = 0.0;

    let (fixed, cols) = if eta == 0.0 {
        let owned;
        let n = match kernel {
            Some(n) => n,
            None => {
                owned = null_space(m, 1e-10);
                &owned
            }
        };
        if n.ncols() == 0 {
            (DVector::zeros(0), DMatrix::zeros(0, split.zeros.len()))
        } else {
            (n.tr_mul(&pinned), n.tr_mul(&free_t))
        }
    } else if res_norm >= eta * (1.0 - ACTIVE_TOL) && res_norm > 0.0 {
        let dir = m.tr_mul(&(&residual_vec / res_norm));
        let mut c = DMatrix::zeros(free_t.nrows(), free_t.ncols() + 1);
        c.view_mut((0, 0), free_t.shape()).copy_from(&free_t);
        c.set_column(free_t.ncols(), &dir);
        lo.push(0.0);
        hi.push(f64::INFINITY);
        if !start.is_empty() || hint.mu.is_some() {
            start.resize(split.zeros.len(), 0.0);
            start.push(hint.mu.unwrap_or(0.0).max(0.0));
        }
        ball_slack = (res_norm - eta).abs();
        (pinned, c)
    } else {
        (pinned, free_t)
    };

    let hint_start = if start.len() == lo.len() { Some(start) } else { None };
    let (x, resid) = bounded_least_squares(&fixed, &cols, &lo, &hi, hint_start);

    // Complementary slackness: sum over zeros of |c_i| - u_i c_i, relative
    // to the objective; plus the multiplier times the ball slack.
    let objective = l1(&coeffs);
    let mut defect = 0.0;
    for (k, &i) in split.zeros.iter().enumerate() {
        defect += coeffs[i].abs() - x[k] * coeffs[i];
    }
    if lo.len() > split.zeros.len() {
        defect += x[split.zeros.len()] * ball_slack;
    }
    let defect = if objective > 0.0 { defect / objective } else { 0.0 };
    resid + defect.max(0.0)
}

/// `min ||fixed + cols x||_2` over `lo <= x <= hi`; returns the minimizer
/// found and the residual norm there.
///
/// Tries the clamped minimum-norm solution first, then runs projected
/// accelerated gradient with adaptive restart from the better of that and
/// the supplied start.
pub(crate) fn bounded_least_squares(
    fixed: &DVector<f64>,
    cols: &DMatrix<f64>,
    lo: &[f64],
    hi: &[f64],
    start: Option<Vec<f64>>,
) -> (DVector<f64>, f64) {
    let n = cols.ncols();
    let project = |x: &mut DVector<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let resid = |x: &DVector<f64>| (fixed + cols * x).norm();
    if n == 0 || cols.nrows() == 0 {
        let x = DVector::zeros(n);
        return (x, fixed.norm());
    }

    let svd = cols.clone().svd(true, true);
    let top = svd.singular_values.max();
    let mut x = match svd.solve(&(-fixed), 1e-12 * top.max(f64::MIN_POSITIVE)) {
        Ok(v) => v,
        Err(_) => DVector::zeros(n),
    };
    project(&mut x);
    let mut best_r = resid(&x);
    if let Some(s) = start {
        let mut s = DVector::from_vec(s);
        project(&mut s);
        let r = resid(&s);
        if r < best_r {
            x = s;
            best_r = r;
        }
    }
    let target = 1e-14 * (1.0 + fixed.norm());
    if best_r <= target || top == 0.0 {
        return (x, best_r);
    }

    let lip = top * top;
    let step = 1.0 / lip;
    let mut best_x = x.clone();
    let mut prev = x.clone();
    let mut yk = x.clone();
    let mut t = 1.0_f64;
    let mut last_obj = best_r;
    for _ in 0..BOX_ITERS {
        let r = fixed + cols * &yk;
        let grad = cols.tr_mul(&r);
        let mut next = &yk - grad * step;
        project(&mut next);
        let rn = resid(&next);
        if rn < best_r {
            best_r = rn;
            best_x.copy_from(&next);
        }
        if best_r <= target {
            break;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if rn > last_obj {
            // Restart momentum.
            t = 1.0;
            yk.copy_from(&next);
        } else {
            yk = &next + (&next - &prev) * ((t - 1.0) / t_next);
            t = t_next;
        }
        let moved = (&next - &prev).amax();
        prev = next;
        last_obj = rn;
        if moved <= 1e-16 * (1.0 + prev.amax()) {
            break;
        }
    }
    (best_x, best_r)
}

/// Sign-pattern helper shared with the polish step.
pub(crate) fn pinned_direction(omega: &DMatrix<f64>, split: &SupportSplit) -> DVector<f64> {
    let signs = DVector::from_vec(split.signs.clone());
    select_rows(omega, &split.support).tr_mul(&signs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_split_uses_relative_cutoff() {
        let c = DVector::from_vec(vec![1.0, 1e-9, -0.5, 0.0]);
        let s = split_support(&c);
        assert_eq!(s.support, vec![0, 2]);
        assert_eq!(s.signs, vec![1.0, -1.0]);
        assert_eq!(s.zeros, vec![1, 3]);
    }

    #[test]
    fn bounded_ls_interior_solution() {
        // x = -fixed / 2 lies inside the box.
        let cols = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let fixed = DVector::from_vec(vec![1.0, -1.0]);
        let (x, r) = bounded_least_squares(&fixed, &cols, &[-1.0, -1.0], &[1.0, 1.0], None);
        assert!(r < 1e-14);
        assert!((x[0] + 0.5).abs() < 1e-14 && (x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bounded_ls_active_bound() {
        // Unconstrained optimum x = 3 is clipped to 1; residual 2.
        let cols = DMatrix::from_row_slice(1, 1, &[1.0]);
        let fixed = DVector::from_vec(vec![-3.0]);
        let (x, r) = bounded_least_squares(&fixed, &cols, &[-1.0], &[1.0], None);
        assert_eq!(x[0], 1.0);
        assert!((r - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bounded_ls_needs_iterations() {
        // The clamped min-norm point leaves residual ~0.68, but (0.75, 0.75, 1)
        // solves x1 + x2 + 3 x3 = 4.5 inside the box.
        let cols = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 3.0]);
        let fixed = DVector::from_vec(vec![-4.5]);
        let (_, r) = bounded_least_squares(&fixed, &cols, &[-1.0; 3], &[1.0; 3], None);
        assert!(r < 1e-12, "residual {r}");
        // Out of reach: best is all ones, residual 0.5.
        let fixed = DVector::from_vec(vec![-5.5]);
        let (_, r) = bounded_least_squares(&fixed, &cols, &[-1.0; 3], &[1.0; 3], None);
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_problem_certifies() {
        let frame = Frame::new(DMatrix::identity(3, 3)).unwrap();
        let m = DMatrix::identity(3, 3);
        let y = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert!(certify(&frame, &m, &y, &y, 0.0) <= 1e-10);
    }

    #[test]
    fn two_dimensional_example() {
        let frame = Frame::new(DMatrix::identity(2, 2)).unwrap();
        let m = DMatrix::from_row_slice(1, 2, &[2.0, 1.0]);
        let y = DVector::from_vec(vec![2.0]);
        let opt = DVector::from_vec(vec![1.0, 0.0]);
        assert!(certify(&frame, &m, &opt, &y, 0.0) <= 1e-12);
        // Another feasible point, (0, 2), is not optimal.
        let other = DVector::from_vec(vec![0.0, 2.0]);
        assert!(certify(&frame, &m, &other, &y, 0.0) > 1e-3);
    }

    #[test]
    fn zero_is_optimal_inside_noise_ball() {
        let frame = Frame::new(DMatrix::identity(2, 2)).unwrap();
        let m = DMatrix::from_row_slice(1, 2, &[2.0, 1.0]);
        let y = DVector::from_vec(vec![0.5]);
        assert!(certify(&frame, &m, &DVector::zeros(2), &y, 1.0) <= 1e-14);
    }
}
