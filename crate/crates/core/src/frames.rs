//! Analysis operators and their frame bounds.
//!
//! A frame is stored as its analysis operator `omega` (p x d, rows are the
//! frame vectors) together with the optimal bounds `A <= ||omega x||^2 /
//! ||x||^2 <= B`, computed once from a dense SVD.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::unit_sphere;

/// Relative tolerance under which `A` and `B` are considered equal.
pub const TIGHT_TOL: f64 = 1e-8;

/// Rank cutoff: `A <= RANK_TOL * B` means the rows do not span R^d.
pub const RANK_TOL: f64 = 1e-12;

const MAX_DRAWS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    omega: DMatrix<f64>,
    lower: f64,
    upper: f64,
    seed: Option<u64>,
}

impl Frame {
    /// Wraps an analysis operator, computing its bounds.
    pub fn new(omega: DMatrix<f64>) -> Result<Self> {
        let (lower, upper) = frame_bounds(&omega)?;
        Ok(Self {
            omega,
            lower,
            upper,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn into_omega(self) -> DMatrix<f64> {
        self.omega
    }

    /// Lower frame bound `A`.
    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    /// Upper frame bound `B`.
    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    pub fn ratio(&self) -> f64 {
        self.upper / self.lower
    }

    pub fn p(&self) -> usize {
        self.omega.nrows()
    }

    pub fn d(&self) -> usize {
        self.omega.ncols()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_tight(&self) -> bool {
        (self.upper - self.lower).abs() <= TIGHT_TOL * self.upper
    }

    pub fn meta(&self) -> FrameMeta {
        FrameMeta {
            p: self.p(),
            d: self.d(),
            lower_bound: self.lower,
            upper_bound: self.upper,
            seed: self.seed,
        }
    }
}

/// JSON sidecar written next to a frame's CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub p: usize,
    pub d: usize,
    #[serde(rename = "A")]
    pub lower_bound: f64,
    #[serde(rename = "B")]
    pub upper_bound: f64,
    pub seed: Option<u64>,
}

/// Squared extreme singular values `(A, B)` of `omega`.
pub fn frame_bounds(omega: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (p, d) = omega.shape();
    if d == 0 {
        return Err(Error::InvalidArgument("frame with zero columns".into()));
    }
    if omega.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("frame has non-finite entries".into()));
    }
    let sv = crate::linalg::singular_values(omega);
    let upper = sv.first().map_or(0.0, |s| s * s);
    // Fewer rows than columns leaves a kernel: the lower bound is zero.
    let lower = if p < d { 0.0 } else { sv[d - 1] * sv[d - 1] };
    if upper == 0.0 || lower <= RANK_TOL * upper {
        return Err(Error::NotAFrame { lower, upper });
    }
    Ok((lower, upper))
}

/// Random tight frame: orthonormal basis of the column space of a p x d
/// matrix whose rows are uniform on the unit sphere.
pub fn tight_frame<R: Rng + ?Sized>(p: usize, d: usize, rng: &mut R) -> Result<Frame> {
    if d == 0 || p < d {
        return Err(Error::InvalidArgument(format!(
            "tight frame needs p >= d >= 1, got p = {p}, d = {d}"
        )));
    }
    for _ in 0..MAX_DRAWS {
        let mut raw = DMatrix::zeros(p, d);
        for i in 0..p {
            raw.set_row(i, &unit_sphere(rng, d).transpose());
        }
        let qr = raw.qr();
        let r = qr.r();
        let diag: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
        let top = diag.iter().copied().fold(0.0, f64::max);
        if diag.iter().any(|&v| v <= 1e-10 * top) {
            continue;
        }
        return Frame::new(qr.q());
    }
    Err(Error::DegenerateDraw {
        attempts: MAX_DRAWS,
    })
}

/// Multiplies row `i` of the base operator by `scales[i]`.
pub fn scaled_frame(base: &Frame, scales: &[f64]) -> Result<Frame> {
    if scales.len() != base.p() {
        return Err(Error::Dimension(format!(
            "{} row scales for a frame with {} rows",
            scales.len(),
            base.p()
        )));
    }
    if scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument("row scales must be positive".into()));
    }
    let mut omega = base.omega().clone();
    for (i, &s) in scales.iter().enumerate() {
        omega.row_mut(i).scale_mut(s);
    }
    let frame = Frame::new(omega)?;
    Ok(match base.seed() {
        Some(seed) => frame.with_seed(seed),
        None => frame,
    })
}

/// Non-tight frame with a requested bound ratio `B/A`.
///
/// Row scales are `exp(spread * u_i)` with `u_i` uniform on [0, 1] drawn
/// once; `spread` is then found by bisection so that the realized ratio
/// matches `target_ratio`.
pub fn frame_with_ratio<R: Rng + ?Sized>(
    base: &Frame,
    target_ratio: f64,
    rng: &mut R,
) -> Result<Frame> {
    if !(target_ratio >= 1.0 && target_ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bound ratio must be >= 1, got {target_ratio}"
        )));
    }
    let offsets: Vec<f64> = (0..base.p()).map(|_| rng.random::<f64>()).collect();
    let build = |spread: f64| {
        let scales: Vec<f64> = offsets.iter().map(|u| (spread * u).exp()).collect();
        scaled_frame(base, &scales)
    };
    if target_ratio <= base.ratio() * (1.0 + TIGHT_TOL) {
        return Ok(base.clone());
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut expansions = 0;
    while build(hi)?.ratio() < target_ratio {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::InvalidArgument(format!(
                "bound ratio {target_ratio} unreachable by row scaling"
            )));
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if build(mid)?.ratio() < target_ratio {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    build(hi)
}
