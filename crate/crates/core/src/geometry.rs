//! Gaussian widths of the cones and sets that govern measurement counts,
//! and an empirical check of escape through a mesh.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::e_m;
use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::linalg::linf;
use crate::rng::{gaussian_matrix, gaussian_vector, Stream};
use crate::stats::{monte_carlo, WidthEstimate};

/// Relative threshold separating the support of `omega x` from its zeros.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Slack on the directional derivative in the descent-cone test.
pub const DESCENT_TOL: f64 = 1e-12;
/// Proposal budget when sampling descent directions.
pub const MAX_PROPOSALS: usize = 1_000_000;
/// Gaussian samples for the width of a finite direction set.
pub const FINITE_WIDTH_SAMPLES: usize = 10_000;

/// Proximal map of `t |.|`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Monte-Carlo estimate of `E S_t(g)^2` for a standard normal `g`.
pub fn soft_threshold_moment_mc<R: Rng + ?Sized>(t: f64, n_samples: usize, rng: &mut R) -> WidthEstimate {
    let base = rng.random();
    monte_carlo(n_samples, base, |r| {
        let g: f64 = r.sample(rand_distr::StandardNormal);
        soft_threshold(g, t).powi(2)
    })
    .estimate()
}

/// Squared distance from `g` to the normal cone of the l1 norm at a point
/// with the given support and signs:
/// `min_{t >= 0} sum_S (g_i - t sgn_i)^2 + sum_{S^c} S_t(g_i)^2`.
pub fn polar_cone_sqdist(g: &DVector<f64>, support: &[usize], signs: &[f64]) -> f64 {
    let mut on = vec![false; g.len()];
    let aligned: Vec<f64> = support
        .iter()
        .zip(signs)
        .map(|(&i, &s)| {
            on[i] = true;
            g[i] * s
        })
        .collect();
    let off: Vec<f64> = (0..g.len()).filter(|&i| !on[i]).map(|i| g[i].abs()).collect();
    let f = |t: f64| {
        let a: f64 = aligned.iter().map(|v| (v - t).powi(2)).sum();
        let b: f64 = off.iter().map(|&v| soft_threshold(v, t).powi(2)).sum();
        a + b
    };

    let mut lo = 0.0;
    let mut hi = linf(g) + (support.len() as f64).sqrt();
    while hi - lo > 1e-10 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t_hat = 0.5 * (lo + hi);

    // f is quadratic between consecutive |g_i| off the support; solve it
    // exactly on the piece that holds t_hat.
    let mut seg_lo = 0.0f64;
    let mut seg_hi = f64::INFINITY;
    let mut sum = aligned.iter().sum::<f64>();
    let mut count = aligned.len();
    for &v in &off {
        if v > t_hat {
            sum += v;
            count += 1;
            seg_hi = seg_hi.min(v);
        } else {
            seg_lo = seg_lo.max(v);
        }
    }
    let mut best = f(t_hat);
    if count > 0 {
        let t = (sum / count as f64).clamp(seg_lo, seg_hi);
        best = best.min(f(t));
    }
    best.max(0.0)
}

/// Monte-Carlo estimate of `E dist(g, N)` for the normal cone `N` of the
/// given sign pattern, which majorizes the width of the descent cone
/// intersected with the unit ball.
pub fn width_polar_mc<R: Rng + ?Sized>(
    support: &[usize],
    signs: &[f64],
    p: usize,
    n_samples: usize,
    rng: &mut R,
) -> WidthEstimate {
    let base = rng.random();
    monte_carlo(n_samples, base, |r| {
        polar_cone_sqdist(&gaussian_vector(r, p), support, signs).sqrt()
    })
    .estimate()
}

/// `sqrt(2 s ln(e p / s))`, the closed-form bound on the descent-cone width.
pub fn width_bound_cone(s: usize, p: usize) -> f64 {
    let (s, p) = (s as f64, p as f64);
    (2.0 * s * (1.0 + (p / s).ln())).sqrt()
}

/// Norm whose unit ball is the convex hull of `s`-sparse unit vectors:
/// sum of the l2 norms of consecutive size-`s` blocks of the magnitudes
/// sorted in non-increasing order.
pub fn d_norm(x: &DVector<f64>, s: usize) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.chunks(s.max(1))
        .map(|block| block.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum()
}

/// l2 norm of the `s` largest magnitudes of `g`, the support function of
/// the `s`-sparse hull at `g`.
fn top_s_norm(g: &mut [f64], s: usize) -> f64 {
    for v in g.iter_mut() {
        *v = v.abs();
    }
    if s < g.len() {
        g.select_nth_unstable_by(s, |a, b| b.total_cmp(a));
    }
    g[..s].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Monte-Carlo estimate of the Gaussian width of the `s`-sparse hull in
/// dimension `p`.
pub fn width_d_mc<R: Rng + ?Sized>(p: usize, s: usize, n_samples: usize, rng: &mut R) -> WidthEstimate {
    let base = rng.random();
    let s = s.min(p);
    monte_carlo(n_samples, base, |r| {
        let mut g: Vec<f64> = gaussian_vector(r, p).data.into();
        top_s_norm(&mut g, s)
    })
    .estimate()
}

/// `sqrt(2 s ln(e p / s)) + sqrt(s)`, the bound on the width of the
/// `s`-sparse hull.
pub fn width_bound_d(s: usize, p: usize) -> f64 {
    width_bound_cone(s, p) + (s as f64).sqrt()
}

/// Descent cone of `v -> ||omega v||_1` at an anchor `x`.
#[derive(Debug, Clone)]
pub struct TangentConeSampler<'a> {
    frame: &'a Frame,
    anchor: DVector<f64>,
    support: Vec<usize>,
    signs: Vec<f64>,
    cosupport: Vec<usize>,
}

impl<'a> TangentConeSampler<'a> {
    pub fn new(frame: &'a Frame, x: &DVector<f64>) -> Result<Self> {
        if x.len() != frame.d() {
            return Err(Error::Dimension(format!("anchor has length {}, frame has d = {}", x.len(), frame.d())));
        }
        let coeffs = frame.omega() * x;
        let cut = SUPPORT_TOL * linf(&coeffs);
        let (mut support, mut signs, mut cosupport) = (Vec::new(), Vec::new(), Vec::new());
        for (i, &c) in coeffs.iter().enumerate() {
            if c.abs() > cut {
                support.push(i);
                signs.push(c.signum());
            } else {
                cosupport.push(i);
            }
        }
        Ok(Self { frame, anchor: x.clone(), support, signs, cosupport })
    }

    pub fn anchor(&self) -> &DVector<f64> {
        &self.anchor
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn cosupport(&self) -> &[usize] {
        &self.cosupport
    }

    /// One-sided derivative of `||omega .||_1` at the anchor along `w`.
    pub fn directional_derivative(&self, w: &DVector<f64>) -> f64 {
        let ow = self.frame.omega() * w;
        let on: f64 = self.support.iter().zip(&self.signs).map(|(&i, s)| s * ow[i]).sum();
        let off: f64 = self.cosupport.iter().map(|&i| ow[i].abs()).sum();
        on + off
    }

    /// Draws `n` unit descent directions by rejection from Gaussian
    /// proposals; columns of the returned `d x n` matrix.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, max_proposals: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        let d = self.frame.d();
        let mut dirs = DMatrix::zeros(d, n);
        let mut accepted = 0;
        for _ in 0..max_proposals {
            if accepted == n {
                break;
            }
            let w = gaussian_vector(rng, d);
            if tangent_dir_test(self, &w) {
                let norm = w.norm();
                dirs.set_column(accepted, &(w / norm));
                accepted += 1;
            }
        }
        if accepted < n {
            return Err(Error::RejectionStall { accepted, wanted: n, proposals: max_proposals });
        }
        Ok(dirs)
    }
}

/// Whether `w` is a descent direction at the sampler's anchor (boundary
/// directions included).
pub fn tangent_dir_test(sampler: &TangentConeSampler<'_>, w: &DVector<f64>) -> bool {
    sampler.directional_derivative(w) <= DESCENT_TOL
}

/// Outcome of the escape-through-a-mesh experiment on a finite direction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeEstimate {
    /// Fraction of draws of `M` with `min_v ||M v||_2` above the threshold.
    pub frequency: f64,
    pub n_trials: usize,
    pub n_dirs: usize,
    /// Estimated width of `omega(T)`.
    pub width: WidthEstimate,
    pub e_m: f64,
    /// `E_m - width / sqrt(A) - t`.
    pub threshold: f64,
    /// `1 - exp(-t^2 / 2)`.
    pub probability_bound: f64,
}

/// Escape frequency for `n_dirs` descent directions sampled at `x`.
#[allow(clippy::too_many_arguments)]
pub fn escape_frequency<R: Rng + ?Sized>(
    frame: &Frame,
    x: &DVector<f64>,
    m: usize,
    t: f64,
    n_dirs: usize,
    n_trials: usize,
    rng: &mut R,
) -> Result<EscapeEstimate> {
    if n_dirs == 0 {
        return Err(Error::InvalidArgument("n_dirs must be >= 1".into()));
    }
    let sampler = TangentConeSampler::new(frame, x)?;
    let dirs = sampler.sample(n_dirs, MAX_PROPOSALS, rng)?;
    escape_frequency_on(frame, &dirs, m, t, n_trials, rng)
}

/// Escape frequency for an explicit set of unit directions (columns).
pub fn escape_frequency_on<R: Rng + ?Sized>(
    frame: &Frame,
    dirs: &DMatrix<f64>,
    m: usize,
    t: f64,
    n_trials: usize,
    rng: &mut R,
) -> Result<EscapeEstimate> {
    if m == 0 || n_trials == 0 || dirs.ncols() == 0 {
        return Err(Error::InvalidArgument("m, n_trials and the direction count must be >= 1".into()));
    }
    if dirs.nrows() != frame.d() {
        return Err(Error::Dimension(format!("directions have {} rows, frame has d = {}", dirs.nrows(), frame.d())));
    }
    let images = frame.omega() * dirs;
    let p = frame.p();
    let width = monte_carlo(FINITE_WIDTH_SAMPLES, rng.random(), |r: &mut Stream| {
        let g = gaussian_vector(r, p);
        images.tr_mul(&g).max()
    })
    .estimate();
    let em = e_m(m);
    let threshold = em - width.mean / frame.lower_bound().sqrt() - t;
    let d = frame.d();
    let hits = monte_carlo(n_trials, rng.random(), |r: &mut Stream| {
        let mm = gaussian_matrix(r, m, d);
        let least = (&mm * dirs)
            .column_iter()
            .map(|c| c.norm())
            .fold(f64::INFINITY, f64::min);
        if least > threshold {
            1.0
        } else {
            0.0
        }
    });
    Ok(EscapeEstimate {
        frequency: hits.mean(),
        n_trials,
        n_dirs: dirs.ncols(),
        width,
        e_m: em,
        threshold,
        probability_bound: 1.0 - (-t * t / 2.0).exp(),
    })
}

#[cfg(test)]
mod tests;
