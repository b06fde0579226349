//! Closed-form measurement counts and recovery-error radii.
//!
//! Every measurement bound has the form `m^2 / (m + 1) >= rhs`; the
//! functions here evaluate `rhs` and return the smallest integer `m >= 1`
//! satisfying it. Nothing is clipped at the ambient dimension.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Which noise coefficient the robust l2 error uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauForm {
    /// `tau` is the robust null space constant itself.
    #[default]
    Raw,
    /// `tau` is the Gaussian-matrix parameter; the effective robust
    /// constant is `tau * sqrt(2B) / sqrt(m)`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub s: usize,
    pub p: usize,
    pub eps: f64,
    pub rho: f64,
    pub tau: f64,
    pub eta: f64,
    #[serde(default)]
    pub tau_form: TauForm,
}

impl BoundQuery {
    /// Tight frame, ε = 0.02, ρ = 0.9, τ = 1, η = 0.
    pub fn new(s: usize, p: usize) -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            s,
            p,
            eps: 0.02,
            rho: 0.9,
            tau: 1.0,
            eta: 0.0,
            tau_form: TauForm::Raw,
        }
    }

    pub fn frame(mut self, a: f64, b: f64) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    fn check_common(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b >= self.a && self.b.is_finite()) {
            return Err(invalid(format!("need 0 < A <= B, got A = {}, B = {}", self.a, self.b)));
        }
        if self.s == 0 || self.s > self.p {
            return Err(invalid(format!("need 1 <= s <= p, got s = {}, p = {}", self.s, self.p)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("need 0 < eps < 1, got {}", self.eps)));
        }
        Ok(())
    }

    fn check_rho(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid(format!("need 0 < rho < 1, got {}", self.rho)));
        }
        Ok(())
    }

    fn check_eta(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("need eta >= 0, got {}", self.eta)));
        }
        Ok(())
    }

    /// `ln(e p / s)`.
    fn log_term(&self) -> f64 {
        1.0 + (self.p as f64 / self.s as f64).ln()
    }

    /// `1 + (1 + 1/rho)^2`.
    fn nsp_factor(&self) -> f64 {
        let k = 1.0 + 1.0 / self.rho;
        1.0 + k * k
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidArgument(msg)
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for &t in terms {
        let next = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - next) + t;
        } else {
            comp += (t - next) + sum;
        }
        sum = next;
    }
    sum + comp
}

/// `E ||g||_2` for a standard Gaussian `g` in R^m.
pub fn e_m(m: usize) -> f64 {
    assert!(m >= 1, "E_m needs m >= 1");
    let m = m as f64;
    (0.5 * std::f64::consts::LN_2 + ln_gamma(0.5 * (m + 1.0)) - ln_gamma(0.5 * m)).exp()
}

/// Whether `m^2 / (m + 1) >= rhs`, with a single rounding.
pub fn satisfies(m: usize, rhs: f64) -> bool {
    let m = m as f64;
    (-rhs).mul_add(m + 1.0, m * m) >= 0.0
}

/// Smallest `m >= 1` with `m^2 / (m + 1) >= rhs`.
pub fn min_measurements(rhs: f64) -> usize {
    assert!(rhs.is_finite(), "non-finite bound");
    if rhs <= 0.5 {
        return 1;
    }
    // Positive root of m^2 - rhs m - rhs = 0, then settle by direct checks.
    let root = 0.5 * (rhs + (rhs * rhs + 4.0 * rhs).sqrt());
    let mut m = (root.floor() as usize).saturating_sub(2).max(1);
    while !satisfies(m, rhs) {
        m += 1;
    }
    while m > 1 && satisfies(m - 1, rhs) {
        m -= 1;
    }
    m
}

/// Right-hand side of the nonuniform (fixed signal) bound.
pub fn nonuniform_rhs(q: &BoundQuery) -> Result<f64> {
    q.check_common()?;
    let (a, b, s) = (q.a, q.b, q.s as f64);
    let inner = compensated_sum(&[q.log_term().sqrt(), (a * (1.0 / q.eps).ln() / (b * s)).sqrt()]);
    Ok(2.0 * b * s / a * inner * inner)
}

/// Right-hand side of the nonuniform bound with measurement noise.
pub fn nonuniform_noisy_rhs(q: &BoundQuery) -> Result<f64> {
    q.check_common()?;
    if !(q.tau > 0.0 && q.tau.is_finite()) {
        return Err(invalid(format!("need tau > 0, got {}", q.tau)));
    }
    let (a, b, s) = (q.a, q.b, q.s as f64);
    let inner = compensated_sum(&[
        q.log_term().sqrt(),
        (a * (1.0 / q.eps).ln() / (b * s)).sqrt(),
        q.tau * (a / (2.0 * s * b)).sqrt(),
    ]);
    Ok(2.0 * b * s / a * inner * inner)
}

/// Right-hand side of the uniform (all signals) bound.
pub fn uniform_rhs(q: &BoundQuery) -> Result<f64> {
    q.check_common()?;
    q.check_rho()?;
    let (a, b, s) = (q.a, q.b, q.s as f64);
    let c = q.nsp_factor();
    let inner = compensated_sum(&[
        q.log_term().sqrt(),
        std::f64::consts::FRAC_1_SQRT_2,
        (a * (1.0 / q.eps).ln() / (b * s * c)).sqrt(),
    ]);
    Ok(2.0 * b * s * c / a * inner * inner)
}

/// Right-hand side of the robust uniform bound: the uniform one scaled by
/// `tau^2 / (tau - 1)^2`.
pub fn uniform_robust_rhs(q: &BoundQuery) -> Result<f64> {
    if !(q.tau > 1.0 && q.tau.is_finite()) {
        return Err(invalid(format!("need tau > 1, got {}", q.tau)));
    }
    let factor = q.tau * q.tau / ((q.tau - 1.0) * (q.tau - 1.0));
    Ok(factor * uniform_rhs(q)?)
}

pub fn m_nonuniform(q: &BoundQuery) -> Result<usize> {
    Ok(min_measurements(nonuniform_rhs(q)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyBound {
    pub m: usize,
    /// `2 eta / tau`.
    pub error_radius: f64,
}

pub fn m_nonuniform_noisy(q: &BoundQuery) -> Result<NoisyBound> {
    q.check_eta()?;
    let m = min_measurements(nonuniform_noisy_rhs(q)?);
    Ok(NoisyBound {
        m,
        error_radius: 2.0 * q.eta / q.tau,
    })
}

pub fn m_uniform(q: &BoundQuery) -> Result<usize> {
    Ok(min_measurements(uniform_rhs(q)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustBound {
    pub m: usize,
    /// Multiplies `sigma_s(omega x)_1` in the l2 error.
    pub sigma_coeff: f64,
    /// Multiplies `eta` in the l2 error (evaluated at the returned `m`).
    pub noise_coeff: f64,
}

pub fn m_uniform_robust(q: &BoundQuery) -> Result<RobustBound> {
    let m = min_measurements(uniform_robust_rhs(q)?);
    let (a, rho) = (q.a, q.rho);
    Ok(RobustBound {
        m,
        sigma_coeff: 2.0 * (1.0 + rho).powi(2) / (a.sqrt() * (1.0 - rho) * (q.s as f64).sqrt()),
        noise_coeff: gaussian_noise_coeff(q, m),
    })
}

fn gaussian_noise_coeff(q: &BoundQuery, m: usize) -> f64 {
    2.0 * q.tau * (2.0 * q.b).sqrt() * (3.0 + q.rho) / ((m as f64).sqrt() * q.a.sqrt() * (1.0 - q.rho))
}

/// Right-hand sides of the recovery-error guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    /// `||omega (x - xhat)||_1` under the null space property.
    pub l1: f64,
    /// `||x - xhat||_2` under the l2-stable property.
    pub l2: f64,
    /// `||x - xhat||_2` under the robust property with noise `eta`.
    pub l2_robust: f64,
    /// `2 eta / tau`, the tangent-cone noisy error radius.
    pub cone: f64,
}

pub fn error_bounds(q: &BoundQuery, sigma_s_value: f64, m: usize) -> Result<ErrorBounds> {
    q.check_rho()?;
    q.check_eta()?;
    if !(q.a > 0.0) || q.s == 0 {
        return Err(invalid("need A > 0 and s >= 1".into()));
    }
    if !(sigma_s_value >= 0.0) {
        return Err(invalid(format!("sigma_s must be >= 0, got {sigma_s_value}")));
    }
    if !(q.tau > 0.0) {
        return Err(invalid(format!("need tau > 0, got {}", q.tau)));
    }
    let rho = q.rho;
    let sqrt_a = q.a.sqrt();
    let l1 = 2.0 * (1.0 + rho) / (1.0 - rho) * sigma_s_value;
    let l2 = 2.0 * (1.0 + rho).powi(2) / (sqrt_a * (1.0 - rho)) * sigma_s_value / (q.s as f64).sqrt();
    let noise_coeff = match q.tau_form {
        TauForm::Raw => 2.0 * q.tau * (3.0 + rho) / (sqrt_a * (1.0 - rho)),
        TauForm::Gaussian => {
            if m == 0 {
                return Err(invalid("Gaussian tau form needs m >= 1".into()));
            }
            gaussian_noise_coeff(q, m)
        }
    };
    Ok(ErrorBounds {
        l1,
        l2,
        l2_robust: l2 + noise_coeff * q.eta,
        cone: 2.0 * q.eta / q.tau,
    })
}
