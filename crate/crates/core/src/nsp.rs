//! Sampling falsifiers for the analysis null space properties.
//!
//! A `NotFalsified` verdict means no tested vector violated the property;
//! it is never a proof.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{error_bounds, BoundQuery, ErrorBounds, TauForm};
use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::linalg::null_space;
use crate::model::{magnitude_order, KERNEL_TOL};
use crate::rng::{gaussian_vector, unit_sphere};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NspVariant {
    /// `||omega_{Lc} v||_1 <= rho ||omega_L v||_1` on `ker M`.
    Plain,
    /// `||omega_{Lc} v||_2 <= rho / sqrt(s) ||omega_L v||_1` on `ker M`.
    L2Stable,
    /// `||omega_{Lc} v||_2 <= rho / sqrt(s) ||omega_L v||_1 + tau ||M v||_2`
    /// for all `v`.
    Robust,
}

impl std::str::FromStr for NspVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "l2_stable" => Ok(Self::L2Stable),
            "robust" => Ok(Self::Robust),
            other => Err(Error::Parse(format!("unknown NSP variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NspStatus {
    Falsified,
    NotFalsified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NspQuery {
    pub variant: NspVariant,
    pub s: usize,
    pub rho: f64,
    /// Only read by the robust variant.
    pub tau: f64,
}

/// Vector and cosupport attaining the worst margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NspWitness {
    pub v: Vec<f64>,
    pub cosupport: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NspReport {
    pub variant: NspVariant,
    pub status: NspStatus,
    /// Largest `lhs - rhs` seen; positive exactly when falsified.
    pub worst_margin: f64,
    pub witness: Option<NspWitness>,
    pub n_tested: usize,
}

/// The cosupport that is hardest for every variant: all indices except the
/// `s` largest magnitudes (ties keep the lower index off the cosupport).
/// Sorted.
pub fn worst_cosupport(v_analysis: &DVector<f64>, s: usize) -> Vec<usize> {
    let mut lambda = magnitude_order(v_analysis).split_off(s.min(v_analysis.len()));
    lambda.sort_unstable();
    lambda
}

/// `lhs - rhs` of the chosen property at analysis coefficients `omega_v`
/// and cosupport `lambda`. `noise` is `tau ||M v||_2` (robust only).
pub fn nsp_margin(variant: NspVariant, omega_v: &DVector<f64>, lambda: &[usize], s: usize, rho: f64, noise: f64) -> f64 {
    let mut on = vec![false; omega_v.len()];
    for &i in lambda {
        on[i] = true;
    }
    let inside: f64 = lambda.iter().map(|&i| omega_v[i].abs()).sum();
    let outside = omega_v.iter().zip(&on).filter(|(_, &o)| !o).map(|(c, _)| *c);
    match variant {
        NspVariant::Plain => outside.map(f64::abs).sum::<f64>() - rho * inside,
        NspVariant::L2Stable => outside.map(|c| c * c).sum::<f64>().sqrt() - rho / (s as f64).sqrt() * inside,
        NspVariant::Robust => {
            outside.map(|c| c * c).sum::<f64>().sqrt() - rho / (s as f64).sqrt() * inside - noise
        }
    }
}

/// Tests `n_samples` unit vectors, each at its worst cosupport. Kernel
/// variants draw from the unit sphere of `ker M`, the robust variant from
/// the unit sphere of `R^d`.
pub fn nsp_check<R: Rng + ?Sized>(
    m: &DMatrix<f64>,
    frame: &Frame,
    query: &NspQuery,
    n_samples: usize,
    rng: &mut R,
) -> Result<NspReport> {
    let (p, d) = (frame.p(), frame.d());
    let NspQuery { variant, s, rho, tau } = *query;
    if m.ncols() != d {
        return Err(Error::Dimension(format!("M has {} columns, frame has d = {d}", m.ncols())));
    }
    if s == 0 || s > p {
        return Err(Error::InvalidArgument(format!("need 1 <= s <= p = {p}, got {s}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 < rho < 1, got {rho}")));
    }
    if variant == NspVariant::Robust && !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("robust variant needs tau > 0, got {tau}")));
    }

    let kernel = match variant {
        NspVariant::Robust => None,
        _ => Some(null_space(m, KERNEL_TOL)),
    };
    let mut report = NspReport {
        variant,
        status: NspStatus::NotFalsified,
        worst_margin: 0.0,
        witness: None,
        n_tested: 0,
    };
    if kernel.as_ref().is_some_and(|k| k.ncols() == 0) {
        return Ok(report);
    }

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let v = match &kernel {
            Some(k) => {
                let c = gaussian_vector(rng, k.ncols());
                let v = k * c;
                let norm = v.norm();
                v / norm
            }
            None => unit_sphere(rng, d),
        };
        let omega_v = frame.omega() * &v;
        let lambda = worst_cosupport(&omega_v, s);
        let noise = match variant {
            NspVariant::Robust => tau * (m * &v).norm(),
            _ => 0.0,
        };
        let margin = nsp_margin(variant, &omega_v, &lambda, s, rho, noise);
        if margin > worst {
            worst = margin;
            report.witness = Some(NspWitness { v: v.as_slice().to_vec(), cosupport: lambda });
        }
    }
    report.n_tested = n_samples;
    if n_samples > 0 {
        report.worst_margin = worst;
        if worst > 0.0 {
            report.status = NspStatus::Falsified;
        }
    }
    Ok(report)
}

/// Recovery-error radii implied by a null space constant `rho`; `tau` is
/// taken as the robust constant itself.
pub fn implied_errors(rho: f64, a: f64, s: usize, sigma_s_value: f64, tau: f64, eta: f64, m: usize) -> Result<ErrorBounds> {
    let mut q = BoundQuery::new(s, s.max(1)).frame(a, a).rho(rho).tau(tau).eta(eta);
    q.tau_form = TauForm::Raw;
    error_bounds(&q, sigma_s_value, m)
}

#[cfg(test)]
mod tests;
