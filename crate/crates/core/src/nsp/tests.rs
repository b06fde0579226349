use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::bounds::{m_uniform, BoundQuery};
use crate::frames::tight_frame;
use crate::rng::{gaussian_matrix, stream};

fn identity(n: usize) -> Frame {
    Frame::new(DMatrix::identity(n, n)).unwrap()
}

fn query(variant: NspVariant, s: usize, rho: f64) -> NspQuery {
    NspQuery { variant, s, rho, tau: 1.0 }
}

/// Every cosupport of size `p - s`, as sorted index lists.
fn all_cosupports(p: usize, s: usize) -> Vec<Vec<usize>> {
    (0u32..1 << p)
        .filter(|mask| mask.count_ones() as usize == p - s)
        .map(|mask| (0..p).filter(|i| mask >> i & 1 == 1).collect())
        .collect()
}

/// Direct evaluation of both sides of the property at a given cosupport.
fn sides(variant: NspVariant, c: &DVector<f64>, lambda: &[usize], s: usize, rho: f64) -> (f64, f64) {
    let off: Vec<f64> = (0..c.len()).filter(|i| !lambda.contains(i)).map(|i| c[i]).collect();
    let on: f64 = lambda.iter().map(|&i| c[i].abs()).sum();
    match variant {
        NspVariant::Plain => (off.iter().map(|v| v.abs()).sum(), rho * on),
        _ => (off.iter().map(|v| v * v).sum::<f64>().sqrt(), rho / (s as f64).sqrt() * on),
    }
}

#[test]
fn worst_cosupport_cases() {
    assert_eq!(worst_cosupport(&DVector::from_vec(vec![3.0, 1.0, 2.0]), 1), vec![1, 2]);
    assert_eq!(worst_cosupport(&DVector::from_vec(vec![1.0, 1.0]), 1), vec![1]);
    let zero = DVector::zeros(2);
    let lambda = worst_cosupport(&zero, 1);
    assert_eq!(lambda, vec![1]);
    assert_eq!(nsp_margin(NspVariant::Plain, &zero, &lambda, 1, 0.5, 0.0), 0.0);
}

#[test]
fn invertible_measurements_are_vacuous() {
    let f = identity(3);
    let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 3.0]);
    for variant in [NspVariant::Plain, NspVariant::L2Stable] {
        let r = nsp_check(&m, &f, &query(variant, 1, 0.5), 100, &mut stream(1)).unwrap();
        assert_eq!(r.status, NspStatus::NotFalsified);
        assert_eq!(r.n_tested, 0);
        assert!(r.witness.is_none());
    }
}

#[test]
fn difference_measurement_is_falsified() {
    let f = identity(2);
    let m = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
    for rho in [0.1, 0.5, 0.99] {
        let r = nsp_check(&m, &f, &query(NspVariant::Plain, 1, rho), 10, &mut stream(2)).unwrap();
        assert_eq!(r.status, NspStatus::Falsified);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.worst_margin - (1.0 - rho) * h).abs() < 1e-12);
        let w = r.witness.unwrap();
        assert!((w.v[0].abs() - h).abs() < 1e-12 && (w.v[0] - w.v[1]).abs() < 1e-12);
        assert_eq!(w.cosupport, vec![1]);
    }
}

#[test]
fn worst_cosupport_agrees_with_enumeration() {
    let mut rng = stream(3);
    let f = tight_frame(7, 5, &mut rng).unwrap();
    for k in 0..1000 {
        let s = 1 + k % 6;
        let rho = 0.2 + 0.7 * (k % 10) as f64 / 10.0;
        let c = f.omega() * gaussian_vector(&mut rng, 5);
        let lambda = worst_cosupport(&c, s);
        for variant in [NspVariant::Plain, NspVariant::L2Stable] {
            let fast = nsp_margin(variant, &c, &lambda, s, rho, 0.0);
            let (fails, worst) = all_cosupports(7, s).iter().fold((false, f64::NEG_INFINITY), |(any, w), l| {
                let (lhs, rhs) = sides(variant, &c, l, s, rho);
                (any || lhs > rhs, w.max(lhs - rhs))
            });
            assert_eq!(fast > 0.0, fails, "sample {k} {variant:?}");
            assert!((fast - worst).abs() < 1e-12, "sample {k} {variant:?}");
        }
    }
}

#[test]
fn l2_stable_implies_plain_per_sample() {
    let mut rng = stream(4);
    let f = tight_frame(8, 6, &mut rng).unwrap();
    let m = gaussian_matrix(&mut rng, 2, 6);
    let kernel = null_space(&m, KERNEL_TOL);
    let mut stable_passes = 0;
    for k in 0..2000 {
        let s = 1 + k % 4;
        let rho = 0.3 + 0.6 * (k % 7) as f64 / 7.0;
        let c = f.omega() * (&kernel * gaussian_vector(&mut rng, kernel.ncols()));
        let lambda = worst_cosupport(&c, s);
        if nsp_margin(NspVariant::L2Stable, &c, &lambda, s, rho, 0.0) <= 0.0 {
            stable_passes += 1;
            assert!(nsp_margin(NspVariant::Plain, &c, &lambda, s, rho, 0.0) <= 0.0, "sample {k}");
        }
    }
    assert!(stable_passes > 0);
}

#[test]
fn l2_stable_failure_is_membership_in_w() {
    let mut rng = stream(5);
    let f = tight_frame(8, 6, &mut rng).unwrap();
    let m = gaussian_matrix(&mut rng, 3, 6);
    let (s, rho) = (2, 0.8);
    let lambdas = all_cosupports(8, s);
    let (mut inside, mut outside) = (0, 0);
    for k in 0..1000 {
        let r = nsp_check(&m, &f, &query(NspVariant::L2Stable, s, rho), 1, &mut stream(1000 + k)).unwrap();
        let w = DVector::from_vec(r.witness.unwrap().v);
        let c = f.omega() * &w;
        let in_w = lambdas.iter().any(|l| {
            let (lhs, rhs) = sides(NspVariant::L2Stable, &c, l, s, rho);
            lhs > rhs
        });
        assert_eq!(r.status == NspStatus::Falsified, in_w, "sample {k}");
        if in_w {
            inside += 1;
        } else {
            outside += 1;
        }
    }
    assert!(inside > 0 && outside > 0, "{inside} / {outside}");
}

#[test]
fn kernel_samples_are_unit_kernel_vectors() {
    let mut rng = stream(6);
    let f = tight_frame(10, 8, &mut rng).unwrap();
    let m = gaussian_matrix(&mut rng, 5, 8);
    let r = nsp_check(&m, &f, &query(NspVariant::Plain, 2, 0.5), 50, &mut rng).unwrap();
    let v = DVector::from_vec(r.witness.unwrap().v);
    assert!((v.norm() - 1.0).abs() < 1e-12);
    assert!((&m * &v).norm() < 1e-10);
    assert_eq!(r.n_tested, 50);
    assert_eq!(r.status == NspStatus::Falsified, r.worst_margin > 0.0);
}

#[test]
fn robust_variant_uses_measurement_term() {
    let f = identity(3);
    let m = DMatrix::identity(3, 3);
    let q = NspQuery { variant: NspVariant::Robust, s: 1, rho: 0.5, tau: 10.0 };
    let r = nsp_check(&m, &f, &q, 200, &mut stream(7)).unwrap();
    assert_eq!(r.status, NspStatus::NotFalsified);
    assert_eq!(r.n_tested, 200);
    let q = NspQuery { tau: 1e-6, ..q };
    let r = nsp_check(&m, &f, &q, 200, &mut stream(7)).unwrap();
    assert_eq!(r.status, NspStatus::Falsified);
}

#[test]
fn bad_queries_rejected() {
    let f = identity(2);
    let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let mut rng = stream(8);
    assert!(nsp_check(&m, &f, &query(NspVariant::Plain, 0, 0.5), 1, &mut rng).is_err());
    assert!(nsp_check(&m, &f, &query(NspVariant::Plain, 1, 1.0), 1, &mut rng).is_err());
    let q = NspQuery { variant: NspVariant::Robust, s: 1, rho: 0.5, tau: 0.0 };
    assert!(nsp_check(&m, &f, &q, 1, &mut rng).is_err());
    assert!(nsp_check(&DMatrix::zeros(1, 3), &f, &query(NspVariant::Plain, 1, 0.5), 1, &mut rng).is_err());
    assert!("l2_stable".parse::<NspVariant>().is_ok() && "l3".parse::<NspVariant>().is_err());
}

#[test]
fn implied_error_values() {
    let e = implied_errors(0.5, 1.0, 4, 1.0, 1.0, 0.0, 10).unwrap();
    assert!((e.l2 - 4.5).abs() < 1e-12);
    assert!((e.l1 - 6.0).abs() < 1e-12);
    let e = implied_errors(0.5, 2.0, 4, 0.0, 1.0, 0.0, 10).unwrap();
    assert_eq!((e.l1, e.l2, e.l2_robust, e.cone), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn uniform_count_yields_no_violations() {
    // Small geometry where the uniform bound leaves a nontrivial kernel is
    // out of reach (the bound exceeds d), so M is tall and the kernel empty.
    let mut rng = stream(9);
    let f = tight_frame(12, 10, &mut rng).unwrap();
    let m = m_uniform(&BoundQuery::new(2, 12).eps(0.02)).unwrap();
    let mm = gaussian_matrix(&mut rng, m, 10);
    let r = nsp_check(&mm, &f, &query(NspVariant::L2Stable, 2, 0.9), 500, &mut rng).unwrap();
    assert_eq!(r.status, NspStatus::NotFalsified);
}

proptest! {
    #[test]
    fn worst_cosupport_has_right_size(c in prop::collection::vec(-3.0f64..3.0, 1..20), s in 1usize..20) {
        let p = c.len();
        let s = s.min(p);
        let c = DVector::from_vec(c);
        let lambda = worst_cosupport(&c, s);
        prop_assert_eq!(lambda.len(), p - s);
        let least_kept = (0..p).filter(|i| !lambda.contains(i)).map(|i| c[i].abs()).fold(f64::INFINITY, f64::min);
        prop_assert!(lambda.iter().all(|&i| c[i].abs() <= least_kept));
    }
}
