use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use statrs::function::erf::erfc;

use super::*;
use crate::frames::tight_frame;
use crate::model::synth_cosparse;
use crate::rng::{random_subset, stream};

fn identity(n: usize) -> Frame {
    Frame::new(DMatrix::identity(n, n)).unwrap()
}

/// Independent evaluation: dense grid over t followed by local refinement.
fn sqdist_grid(g: &[f64], support: &[usize], signs: &[f64]) -> f64 {
    let f = |t: f64| -> f64 {
        g.iter()
            .enumerate()
            .map(|(i, &gi)| match support.iter().position(|&j| j == i) {
                Some(k) => (gi - t * signs[k]).powi(2),
                None => (gi.abs() - t).max(0.0).powi(2),
            })
            .sum()
    };
    let top = g.iter().fold(0.0f64, |a, v| a.max(v.abs())) + (support.len() as f64).sqrt();
    let n = 20_000;
    let (mut best, mut arg) = (f64::INFINITY, 0.0);
    for k in 0..=n {
        let t = top * k as f64 / n as f64;
        if f(t) < best {
            best = f(t);
            arg = t;
        }
    }
    let h = top / n as f64;
    for k in 0..=2000 {
        let t = (arg - h + h * k as f64 / 1000.0).max(0.0);
        best = best.min(f(t));
    }
    best
}

#[test]
fn soft_threshold_cases() {
    assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    assert_eq!(soft_threshold(2.0, 1.0), 1.0);
    assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
}

#[test]
fn polar_distance_small_cases() {
    assert_eq!(polar_cone_sqdist(&DVector::zeros(3), &[0], &[1.0]), 0.0);
    let g = DVector::from_vec(vec![1.0, 0.0]);
    assert!(polar_cone_sqdist(&g, &[0], &[1.0]).abs() < 1e-15);
    let g = DVector::from_vec(vec![0.0, 2.0]);
    assert!((polar_cone_sqdist(&g, &[0], &[1.0]) - 2.0).abs() < 1e-14);
    // Empty support: the clamp is feasible, distance zero.
    let g = DVector::from_vec(vec![0.3, -4.0]);
    assert!(polar_cone_sqdist(&g, &[], &[]).abs() < 1e-15);
}

#[test]
fn polar_distance_matches_grid_search() {
    let mut rng = stream(3);
    for trial in 0..30 {
        let p = 6 + trial % 5;
        let s = 1 + trial % 4;
        let support = random_subset(&mut rng, p, s);
        let signs: Vec<f64> = support.iter().map(|&i| if (i + trial) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let g = gaussian_vector(&mut rng, p);
        let fast = polar_cone_sqdist(&g, &support, &signs);
        let slow = sqdist_grid(g.as_slice(), &support, &signs);
        assert!(fast <= slow + 1e-12, "trial {trial}: {fast} vs {slow}");
        assert!(slow - fast < 1e-8, "trial {trial}: {fast} vs {slow}");
    }
}

#[test]
fn cone_width_bound_values() {
    assert!((width_bound_cone(7, 7) - 14f64.sqrt()).abs() < 1e-14);
    assert!((width_bound_cone(10, 200) - (20.0 * (1.0 + 20f64.ln())).sqrt()).abs() < 1e-14);
    assert!((width_bound_cone(10, 200) - 8.9395).abs() < 1e-4);
    let vals: Vec<f64> = (1..=60).map(|s| width_bound_cone(s, 60)).collect();
    assert!(vals.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn d_norm_cases() {
    let x = DVector::from_vec(vec![3.0, -2.0, 1.0, 0.0]);
    assert!((d_norm(&x, 2) - (13f64.sqrt() + 1.0)).abs() < 1e-14);
    assert!((d_norm(&x, 1) - 6.0).abs() < 1e-14);
    assert!((d_norm(&x, 4) - 14f64.sqrt()).abs() < 1e-14);
    let x = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0, 3.0, -2.0]);
    assert!((d_norm(&x, 2) - (13f64.sqrt() + 1.0)).abs() < 1e-14);
}

#[test]
fn width_d_special_cases() {
    let est = width_d_mc(30, 30, 20_000, &mut stream(1));
    assert!((est.mean - e_m(30)).abs() <= 4.0 * est.std_err, "{est:?}");
    let est = width_d_mc(1, 1, 50_000, &mut stream(2));
    let half_normal = (2.0 / std::f64::consts::PI).sqrt();
    assert!((est.mean - half_normal).abs() <= 4.0 * est.std_err, "{est:?}");
    let est = width_d_mc(50, 5, 20_000, &mut stream(3));
    assert!(est.mean <= width_bound_d(5, 50) + 3.0 * est.std_err);
}

#[test]
fn width_d_below_bound_on_grid() {
    for p in [10, 40, 90] {
        for s in [1, 3, p / 2, p] {
            let est = width_d_mc(p, s, 4_000, &mut stream((p * 100 + s) as u64));
            assert!(est.mean <= width_bound_d(s, p) + 3.0 * est.std_err, "p {p} s {s}");
        }
    }
}

#[test]
fn polar_width_sanity() {
    let support: Vec<usize> = (0..8).collect();
    let signs = vec![1.0; 8];
    let est = width_polar_mc(&support, &signs, 8, 5_000, &mut stream(4));
    assert!(est.mean <= 8f64.sqrt());

    let mut rng = stream(5);
    let support = random_subset(&mut rng, 100, 10);
    let signs: Vec<f64> = support.iter().map(|&i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
    let est = width_polar_mc(&support, &signs, 100, 4_000, &mut rng);
    let second = est.mean.powi(2) + est.std_err.powi(2) * est.n_samples as f64;
    assert!(second <= width_bound_cone(10, 100).powi(2) + 3.0 * est.std_err);
}

#[test]
fn estimates_reproducible() {
    let a = width_polar_mc(&[1, 4], &[1.0, -1.0], 9, 9_000, &mut stream(11));
    let b = width_polar_mc(&[1, 4], &[1.0, -1.0], 9, 9_000, &mut stream(11));
    assert_eq!(a, b);
    assert_eq!(width_d_mc(9, 2, 5_000, &mut stream(12)), width_d_mc(9, 2, 5_000, &mut stream(12)));
}

#[test]
fn soft_threshold_moment_matches_closed_form() {
    // E S_t(g)^2 = 2 [(1 + t^2) Q(t) - t phi(t)].
    for t in [0.5, 1.0, 2.0] {
        let q = 0.5 * erfc(t / std::f64::consts::SQRT_2);
        let phi = (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let exact = 2.0 * ((1.0 + t * t) * q - t * phi);
        let est = soft_threshold_moment_mc(t, 200_000, &mut stream(20));
        assert!((est.mean - exact).abs() <= 4.0 * est.std_err, "t {t}: {} vs {exact}", est.mean);
        assert!(exact <= (-t * t / 2.0).exp());
    }
}

#[test]
fn descent_direction_cases() {
    let f = identity(2);
    let x = DVector::from_vec(vec![1.0, 0.0]);
    let cone = TangentConeSampler::new(&f, &x).unwrap();
    assert_eq!(cone.support(), &[0]);
    assert_eq!(cone.cosupport(), &[1]);
    assert!(tangent_dir_test(&cone, &(-&x)));
    assert!(!tangent_dir_test(&cone, &DVector::from_vec(vec![0.0, 1.0])));
    assert!(tangent_dir_test(&cone, &DVector::from_vec(vec![-1.0, 0.5])));
    assert!((cone.directional_derivative(&DVector::from_vec(vec![0.0, 1.0])) - 1.0).abs() < 1e-15);
}

#[test]
fn sampled_directions_are_unit_descent_directions() {
    let f = tight_frame(12, 10, &mut stream(6)).unwrap();
    let sig = synth_cosparse(&f, 7, &mut stream(7)).unwrap();
    let cone = TangentConeSampler::new(&f, &sig.x).unwrap();
    assert_eq!(cone.cosupport().len(), 7);
    let dirs = cone.sample(20, MAX_PROPOSALS, &mut stream(8)).unwrap();
    for c in dirs.column_iter() {
        assert!((c.norm() - 1.0).abs() < 1e-12);
        assert!(tangent_dir_test(&cone, &c.into_owned()));
    }
}

#[test]
fn rejection_stall_reported() {
    let f = identity(3);
    let x = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let cone = TangentConeSampler::new(&f, &x).unwrap();
    // Descent directions are rare enough that 5 proposals cannot yield 50.
    let err = cone.sample(50, 5, &mut stream(1)).unwrap_err();
    assert!(matches!(err, Error::RejectionStall { wanted: 50, proposals: 5, .. }));
}

#[test]
fn escape_trivial_threshold() {
    let f = tight_frame(12, 10, &mut stream(9)).unwrap();
    let sig = synth_cosparse(&f, 7, &mut stream(10)).unwrap();
    let est = escape_frequency(&f, &sig.x, 5, 100.0, 5, 50, &mut stream(11)).unwrap();
    assert!(est.threshold < 0.0);
    assert_eq!(est.frequency, 1.0);
}

#[test]
fn escape_single_direction() {
    let f = tight_frame(12, 10, &mut stream(12)).unwrap();
    let sig = synth_cosparse(&f, 7, &mut stream(13)).unwrap();
    let dirs = DMatrix::from_column_slice(10, 1, (-&sig.x).as_slice());
    let n = 400;
    let est = escape_frequency_on(&f, &dirs, 6, 2.0, n, &mut stream(14)).unwrap();
    // Width of a single point is zero up to sampling noise.
    assert!(est.width.mean.abs() <= 4.0 * est.width.std_err);
    let se = (est.probability_bound * (1.0 - est.probability_bound) / n as f64).sqrt();
    assert!(est.frequency >= est.probability_bound - 3.0 * se, "{est:?}");
}

#[test]
fn escape_frequency_meets_bound() {
    let f = tight_frame(25, 20, &mut stream(15)).unwrap();
    let sig = synth_cosparse(&f, 17, &mut stream(16)).unwrap();
    let n = 200;
    let est = escape_frequency(&f, &sig.x, 15, 2.0, 20, n, &mut stream(17)).unwrap();
    let se = (est.probability_bound * (1.0 - est.probability_bound) / n as f64).sqrt();
    assert!(est.frequency >= est.probability_bound - 3.0 * se, "{est:?}");
}

proptest! {
    #[test]
    fn polar_distance_at_most_norm(g in prop::collection::vec(-5.0f64..5.0, 1..12), k in 0usize..12) {
        let p = g.len();
        let support: Vec<usize> = (0..k.min(p)).collect();
        let signs: Vec<f64> = support.iter().map(|&i| if g[i] >= 0.0 { -1.0 } else { 1.0 }).collect();
        let g = DVector::from_vec(g);
        let dist = polar_cone_sqdist(&g, &support, &signs);
        prop_assert!(dist >= 0.0);
        prop_assert!(dist <= g.norm_squared() + 1e-12);
    }

    #[test]
    fn d_norm_is_a_norm(
        x in prop::collection::vec(-10.0f64..10.0, 8),
        y in prop::collection::vec(-10.0f64..10.0, 8),
        c in -4.0f64..4.0,
        s in 1usize..=8,
    ) {
        let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
        let tol = 1e-9 * (1.0 + x.norm() + y.norm());
        prop_assert!(d_norm(&(&x + &y), s) <= d_norm(&x, s) + d_norm(&y, s) + tol);
        prop_assert!((d_norm(&(&x * c), s) - c.abs() * d_norm(&x, s)).abs() <= tol * (1.0 + c.abs()));
        let blocks = 8usize.div_ceil(s) as f64;
        prop_assert!(x.norm() <= d_norm(&x, s) + tol);
        prop_assert!(d_norm(&x, s) <= blocks.sqrt() * x.norm() + tol);
    }

    #[test]
    fn sparse_cone_lies_in_scaled_hull(
        u in prop::collection::vec(-1.0f64..1.0, 12),
        weights in prop::collection::vec(0.0f64..6.0, 12),
        s in 1usize..=12,
        rho in 0.05f64..0.95,
    ) {
        // Heavy weights spread the magnitudes so both members and
        // non-members of the cone get drawn.
        let u = DVector::from_iterator(12, u.iter().zip(&weights).map(|(a, w)| a * w.exp()));
        prop_assume!(u.norm() > 0.0);
        let u = &u / u.norm();
        let mut mags: Vec<f64> = u.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let head = mags[..s].iter().map(|v| v * v).sum::<f64>().sqrt();
        let tail: f64 = mags[s..].iter().sum();
        prop_assume!(head >= rho / (s as f64).sqrt() * tail);
        let radius = (1.0 + (1.0 + 1.0 / rho).powi(2)).sqrt();
        prop_assert!(d_norm(&u, s) <= radius + 1e-9);
    }
}
