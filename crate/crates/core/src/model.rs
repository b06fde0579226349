//! Cosparse signals, best s-term approximation error and Gaussian
//! sensing instances.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::linalg::{null_space, select_rows};
use crate::rng::{gaussian_matrix, gaussian_vector, random_subset, unit_sphere};

/// Relative singular-value cutoff for the kernel of `omega_Lambda`.
pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CosparseSignal {
    pub x: DVector<f64>,
    /// Rows of the analysis operator that annihilate `x` (sorted).
    pub cosupport: Vec<usize>,
}

impl CosparseSignal {
    pub fn cosparsity(&self) -> usize {
        self.cosupport.len()
    }
}

/// Counts the analysis coefficients with `|<omega_i, x>| <= tol`.
///
/// Returns the cosparsity `l` and the (sorted) cosupport.
pub fn cosparsity(frame: &Frame, x: &DVector<f64>, tol: f64) -> (usize, Vec<usize>) {
    let coeffs = frame.omega() * x;
    let cosupport: Vec<usize> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() <= tol)
        .map(|(i, _)| i)
        .collect();
    (cosupport.len(), cosupport)
}

/// Draws a unit-norm signal annihilated by `l` uniformly chosen rows.
///
/// The signal is a Gaussian combination of an orthonormal basis of
/// `ker omega_Lambda`, normalized afterwards.
pub fn synth_cosparse<R: Rng + ?Sized>(frame: &Frame, l: usize, rng: &mut R) -> Result<CosparseSignal> {
    let (p, d) = (frame.p(), frame.d());
    if l > p {
        return Err(Error::InvalidArgument(format!("cosparsity {l} exceeds p = {p}")));
    }
    let cosupport = random_subset(rng, p, l);
    let basis = null_space(&select_rows(frame.omega(), &cosupport), KERNEL_TOL);
    if basis.ncols() == 0 {
        return Err(Error::EmptyKernel { cosparsity: l, d });
    }
    let c = gaussian_vector(rng, basis.ncols());
    let mut x = &basis * c;
    let norm = x.norm();
    if norm == 0.0 {
        // Probability zero; fall back to a sphere draw inside the kernel.
        x = &basis * unit_sphere(rng, basis.ncols());
    } else {
        x /= norm;
    }
    Ok(CosparseSignal { x, cosupport })
}

/// Magnitude order, largest first, ties broken by lower index.
pub(crate) fn magnitude_order(v: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx
}

/// l1 error of the best s-term approximation: sum of all but the `s`
/// largest magnitudes.
pub fn sigma_s(v: &DVector<f64>, s: usize) -> f64 {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter().skip(s).sum()
}

/// Measurements `y = M x + w` with i.i.d. standard normal `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingInstance {
    pub matrix: DMatrix<f64>,
    pub y: DVector<f64>,
    pub eta: f64,
    pub truth: Option<CosparseSignal>,
}

/// JSON sidecar for a stored instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub m: usize,
    pub d: usize,
    pub eta: f64,
    pub cosparsity: Option<usize>,
    pub cosupport: Option<Vec<usize>>,
    pub seed: Option<u64>,
}

impl SensingInstance {
    pub fn meta(&self, seed: Option<u64>) -> InstanceMeta {
        InstanceMeta {
            m: self.matrix.nrows(),
            d: self.matrix.ncols(),
            eta: self.eta,
            cosparsity: self.truth.as_ref().map(CosparseSignal::cosparsity),
            cosupport: self.truth.as_ref().map(|t| t.cosupport.clone()),
            seed,
        }
    }
}

/// Gaussian measurements of `signal`; noise, if any, lies on the sphere of
/// radius `eta`.
pub fn gaussian_instance<R: Rng + ?Sized>(
    frame: &Frame,
    signal: &CosparseSignal,
    m: usize,
    eta: f64,
    rng: &mut R,
) -> Result<SensingInstance> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one measurement".into()));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {eta}")));
    }
    if signal.x.len() != frame.d() {
        return Err(Error::Dimension(format!(
            "signal of length {} for a frame with d = {}",
            signal.x.len(),
            frame.d()
        )));
    }
    let matrix = gaussian_matrix(rng, m, frame.d());
    let mut y = &matrix * &signal.x;
    if eta > 0.0 {
        y += unit_sphere(rng, m) * eta;
    }
    Ok(SensingInstance {
        matrix,
        y,
        eta,
        truth: Some(signal.clone()),
    })
}
