//! Analysis basis pursuit, `min ||omega z||_1` subject to `M z = y`, and
//! its noise-constrained form with `||M z - y||_2 <= eta`.
//!
//! The solver is a primal-dual splitting on the stacked operator
//! `K = [omega; M]`: the analysis block's dual is projected onto the unit
//! l-infinity ball, the measurement block's dual is translated by `y` (and
//! shrunk by `eta` in the noisy case). Every `check_every` iterations the
//! iterate is polished on its estimated cosupport, and the run stops once
//! a point is feasible and passes the optimality certificate.

mod certify;
mod oracle;
mod polish;

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::linalg::{l1, null_space, rank, stacked_norm};

pub use certify::{certify, SUPPORT_TOL};
pub use oracle::oracle_subgradient;

use certify::{certify_with, split_support, CertHint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Feasibility target; `None` means `1e-8 * ||y||_2`.
    pub tol_feas: Option<f64>,
    pub tol_gap: f64,
    /// Extrapolation weight `theta` in [0, 1].
    pub over_relaxation: f64,
    /// Multiplier on the default dual/primal step balance, which is
    /// `p / ||z0||^2` for the starting point `z0`.
    pub step_ratio: f64,
    pub check_every: usize,
    /// Attempt active-set polishing at each check.
    pub polish: bool,
    /// Record `(iter, objective, feas_residual, gap)` at each check.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tol_feas: None,
            tol_gap: 1e-6,
            over_relaxation: 1.0,
            step_ratio: 1.0,
            check_every: 50,
            polish: true,
            trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::InvalidArgument("max_iters and check_every must be >= 1".into()));
        }
        if !(self.tol_gap > 0.0) || self.tol_feas.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.over_relaxation) {
            return Err(Error::InvalidArgument("over_relaxation must lie in [0, 1]".into()));
        }
        if !(self.step_ratio > 0.0 && self.step_ratio.is_finite()) {
            return Err(Error::InvalidArgument("step_ratio must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub feas_residual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub z: DVector<f64>,
    /// `||omega z||_1`.
    pub objective: f64,
    /// `||M z - y||_2`, or its excess over `eta` in the noisy problem.
    pub feas_residual: f64,
    pub cert_gap: f64,
    pub iters: usize,
    pub status: SolveStatus,
    pub trace: Vec<TraceRow>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Solves `min ||omega z||_1` subject to `M z = y`.
pub fn solve_abp(frame: &Frame, m: &DMatrix<f64>, y: &DVector<f64>, opts: &SolverOptions) -> Result<SolveResult> {
    Problem::new(frame, m, y, 0.0, opts)?.run()
}

/// Solves `min ||omega z||_1` subject to `||M z - y||_2 <= eta`.
pub fn solve_abpdn(
    frame: &Frame,
    m: &DMatrix<f64>,
    y: &DVector<f64>,
    eta: f64,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta must be >= 0, got {eta}")));
    }
    Problem::new(frame, m, y, eta, opts)?.run()
}

struct Problem<'a> {
    frame: &'a Frame,
    m: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    eta: f64,
    opts: &'a SolverOptions,
    tol_feas: f64,
    kernel: Option<DMatrix<f64>>,
    start: DVector<f64>,
}

impl<'a> Problem<'a> {
    fn new(
        frame: &'a Frame,
        m: &'a DMatrix<f64>,
        y: &'a DVector<f64>,
        eta: f64,
        opts: &'a SolverOptions,
    ) -> Result<Self> {
        opts.validate()?;
        let (rows, cols) = m.shape();
        if cols != frame.d() || y.len() != rows {
            return Err(Error::Dimension(format!(
                "M is {rows}x{cols}, y has {} entries, frame has d = {}",
                y.len(),
                frame.d()
            )));
        }
        if rows == 0 {
            return Err(Error::InvalidArgument("need at least one measurement".into()));
        }
        let expected = rows.min(cols);
        let r = rank(m, 1e-10);
        if r < expected {
            return Err(Error::RankDeficientM { rank: r, expected });
        }
        let svd = m.clone().svd(true, true);
        let start = svd.solve(y, 0.0).map_err(|e| Error::InvalidArgument(e.into()))?;
        let kernel = (eta == 0.0).then(|| null_space(m, 1e-10));
        let tol_feas = opts.tol_feas.unwrap_or(1e-8 * y.norm());
        Ok(Self {
            frame,
            m,
            y,
            eta,
            opts,
            tol_feas,
            kernel,
            start,
        })
    }

    fn feas_residual(&self, z: &DVector<f64>) -> f64 {
        let r = (self.m * z - self.y).norm();
        if self.eta == 0.0 {
            r
        } else {
            (r - self.eta).max(0.0)
        }
    }

    fn certify(&self, z: &DVector<f64>, hint: &CertHint) -> f64 {
        certify_with(self.frame, self.m, self.kernel.as_ref(), z, self.y, self.eta, hint)
    }

    fn finish(&self, z: DVector<f64>, iters: usize, status: SolveStatus, gap: f64, trace: Vec<TraceRow>) -> SolveResult {
        SolveResult {
            objective: l1(&(self.frame.omega() * &z)),
            feas_residual: self.feas_residual(&z),
            cert_gap: gap,
            iters,
            status,
            z,
            trace,
        }
    }

    /// Tries the polish candidates for the current iterate.
    fn polish(&self, z: &DVector<f64>, hint: &CertHint, tried: &mut HashSet<Vec<usize>>) -> Option<(DVector<f64>, f64)> {
        let omega = self.frame.omega();
        let coeffs = omega * z;
        for cosupport in polish::cosupport_candidates(&coeffs) {
            if !tried.insert(cosupport.clone()) {
                continue;
            }
            let candidate = if self.eta == 0.0 {
                polish::polish_equality(omega, self.m, self.y, z, &cosupport, self.tol_feas)
            } else {
                let mut split = split_support(&coeffs);
                split.zeros = cosupport.clone();
                split.support = (0..coeffs.len()).filter(|i| !cosupport.contains(i)).collect();
                split.signs = split.support.iter().map(|&i| coeffs[i].signum()).collect();
                polish::polish_ball(omega, self.m, self.y, self.eta, &split)
            };
            let Some(candidate) = candidate else { continue };
            if self.feas_residual(&candidate) > self.tol_feas {
                continue;
            }
            let gap = self.certify(&candidate, hint);
            if gap <= self.opts.tol_gap {
                return Some((candidate, gap));
            }
        }
        None
    }

    fn run(&self) -> Result<SolveResult> {
        let omega = self.frame.omega();
        let d = self.frame.d();
        let opts = self.opts;
        let mut trace = Vec::new();

        // Zero is optimal whenever it is feasible.
        if self.y.norm() <= self.eta {
            let z = DVector::zeros(d);
            return Ok(self.finish(z, 0, SolveStatus::Converged, 0.0, trace));
        }

        // Balance the two blocks of K; the constraint set is unchanged.
        let omega_norm = stacked_norm(omega, &DMatrix::zeros(0, d), 100);
        let m_norm = stacked_norm(&DMatrix::zeros(0, d), self.m, 100);
        let scale = if m_norm > 0.0 && omega_norm > 0.0 { m_norm / omega_norm } else { 1.0 };
        let m_s = self.m / scale;
        let y_s = self.y / scale;
        let eta_s = self.eta / scale;

        let lip = 1.01 * stacked_norm(omega, &m_s, 100);
        // Dual iterates live in a box of radius ~sqrt(p), the primal one at
        // the scale of the starting point; sigma/tau tracks their squared
        // ratio so the steps are invariant under rescaling y.
        let start_norm = self.start.norm().max(f64::MIN_POSITIVE);
        let ratio = opts.step_ratio * self.frame.p() as f64 / (start_norm * start_norm);
        let sigma = ratio / lip;
        let tau = 1.0 / (ratio * lip);
        let theta = opts.over_relaxation;

        let mut z = self.start.clone();
        let mut omega_z = omega * &z;
        let mut m_z = &m_s * &z;
        let mut omega_z_prev = omega_z.clone();
        let mut m_z_prev = m_z.clone();
        let mut u = DVector::<f64>::zeros(self.frame.p());
        let mut w = DVector::<f64>::zeros(self.m.nrows());
        let mut tried = HashSet::new();
        let mut best: Option<(DVector<f64>, f64, f64)> = None;

        for iter in 0..=opts.max_iters {
            if iter % opts.check_every == 0 || iter == opts.max_iters {
                let hint = CertHint {
                    u: Some(u.clone()),
                    mu: Some(w.norm() / scale),
                };
                let feas = self.feas_residual(&z);
                let gap = self.certify(&z, &hint);
                if opts.trace {
                    trace.push(TraceRow {
                        iter,
                        objective: l1(&omega_z),
                        feas_residual: feas,
                        gap,
                    });
                }
                if feas <= self.tol_feas && gap <= opts.tol_gap {
                    return Ok(self.finish(z, iter, SolveStatus::Converged, gap, trace));
                }
                if opts.polish {
                    if let Some((zp, gap)) = self.polish(&z, &hint, &mut tried) {
                        return Ok(self.finish(zp, iter, SolveStatus::Converged, gap, trace));
                    }
                }
                let merit = gap + feas / self.y.norm().max(f64::MIN_POSITIVE);
                if best.as_ref().map_or(true, |(_, _, b)| merit <= *b) {
                    best = Some((z.clone(), gap, merit));
                }
                if iter == opts.max_iters {
                    break;
                }
            }

            // Extrapolated point, in image space (K is linear).
            let omega_bar = &omega_z + (&omega_z - &omega_z_prev) * theta;
            let m_bar = &m_z + (&m_z - &m_z_prev) * theta;

            // Analysis block: project onto the l-inf unit ball.
            let mut u_next = &u + &omega_bar * sigma;
            u_next.apply(|v| *v = v.clamp(-1.0, 1.0));
            // Measurement block: translate by y, shrink by eta if noisy.
            let mut w_next = &w + (&m_bar - &y_s) * sigma;
            if eta_s > 0.0 {
                let norm = w_next.norm();
                let shrink = sigma * eta_s;
                if norm <= shrink {
                    w_next.fill(0.0);
                } else {
                    w_next *= 1.0 - shrink / norm;
                }
            }
            let grad = omega.tr_mul(&u_next) + m_s.tr_mul(&w_next);
            let z_next = &z - &grad * tau;
            let omega_next = omega * &z_next;
            let m_next = &m_s * &z_next;

            u = u_next;
            w = w_next;
            z = z_next;
            omega_z_prev = std::mem::replace(&mut omega_z, omega_next);
            m_z_prev = std::mem::replace(&mut m_z, m_next);
        }

        let (z, gap, _) = best.expect("at least one check");
        Ok(self.finish(z, opts.max_iters, SolveStatus::MaxIters, gap, trace))
    }
}
