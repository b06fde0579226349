//! Phase-transition experiments: recovery rates over an `(s, m)` grid and
//! the maximal recoverable sparsity per measurement count.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{m_nonuniform, BoundQuery};
use crate::error::{Error, Result};
use crate::frames::{frame_with_ratio, tight_frame, Frame};
use crate::io::fmt_g17;
use crate::model::{gaussian_instance, synth_cosparse};
use crate::rng::{child, derive_seed, stream};
use crate::solver::{solve_abp, solve_abpdn, SolverOptions};

/// Coordinate reserved for the frame stream; trial coordinates are
/// `(s, m, trial)` and never collide with a one-element tuple.
const FRAME_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSpec {
    Tight,
    /// Target `B/A`, reached by rescaling the rows of the tight frame.
    Ratio(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MGrid {
    Explicit(Vec<usize>),
    /// `step, 2 step, ...` up to `d`.
    Auto { step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub d: usize,
    pub p: usize,
    pub frame_spec: FrameSpec,
    /// Candidate sparsities; empty means every `s` with a nonzero cosparse
    /// signal, `p - d < s < p`.
    pub s_list: Vec<usize>,
    pub m_grid: MGrid,
    pub trials: usize,
    /// A trial succeeds when the solver converges and `||z - x||_2` is
    /// below this.
    pub success_tol: f64,
    pub success_target: f64,
    pub eta: f64,
    pub master_seed: u64,
    /// Failure probability for the theory column.
    pub theory_eps: f64,
    pub solver: SolverOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// `d = 40`, `p = 50`, tight frame, `m` in steps of 2.
    pub fn desk() -> Self {
        Self {
            d: 40,
            p: 50,
            frame_spec: FrameSpec::Tight,
            s_list: Vec::new(),
            m_grid: MGrid::Auto { step: 2 },
            trials: 70,
            success_tol: 1e-5,
            success_target: 0.98,
            eta: 0.0,
            master_seed: 0,
            theory_eps: 0.02,
            solver: SolverOptions::default(),
        }
    }

    /// `d = 200`, `p = 250`, `m` in steps of 10.
    pub fn full() -> Self {
        Self {
            d: 200,
            p: 250,
            m_grid: MGrid::Auto { step: 10 },
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.d == 0 || self.p < self.d {
            return bad(format!("need 1 <= d <= p, got d = {}, p = {}", self.d, self.p));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if !(self.success_tol > 0.0) || !(self.success_target > 0.0 && self.success_target <= 1.0) {
            return bad("need success_tol > 0 and success_target in (0, 1]".into());
        }
        if !(self.eta >= 0.0) || !(self.theory_eps > 0.0 && self.theory_eps < 1.0) {
            return bad("need eta >= 0 and theory_eps in (0, 1)".into());
        }
        if let Some(&s) = self.s_list.iter().find(|&&s| s == 0 || s >= self.p) {
            return bad(format!("sparsity {s} outside [1, p - 1]"));
        }
        if let FrameSpec::Ratio(r) = self.frame_spec {
            if !(r >= 1.0) {
                return bad(format!("frame ratio must be >= 1, got {r}"));
            }
        }
        match &self.m_grid {
            MGrid::Auto { step: 0 } => bad("m grid step must be >= 1".into()),
            MGrid::Explicit(ms) if ms.is_empty() || ms.contains(&0) => bad("m grid must be nonempty with m >= 1".into()),
            _ => self.solver.validate(),
        }
    }

    pub fn s_values(&self) -> Vec<usize> {
        let mut s = if self.s_list.is_empty() {
            (self.p - self.d + 1..self.p).collect()
        } else {
            self.s_list.clone()
        };
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn m_values(&self) -> Vec<usize> {
        let mut m = match &self.m_grid {
            MGrid::Explicit(ms) => ms.clone(),
            MGrid::Auto { step } => (1..=self.d / step).map(|k| k * step).collect(),
        };
        m.sort_unstable();
        m.dedup();
        m
    }

    /// The frame every cell shares, derived from the master seed. Non-tight
    /// frames rescale the same tight frame.
    pub fn frame(&self) -> Result<Frame> {
        let seed = derive_seed(self.master_seed, &[FRAME_STREAM]);
        let tight = tight_frame(self.p, self.d, &mut stream(seed))?.with_seed(seed);
        match self.frame_spec {
            FrameSpec::Tight => Ok(tight),
            FrameSpec::Ratio(r) => Ok(frame_with_ratio(&tight, r, &mut child(seed, &[1]))?.with_seed(seed)),
        }
    }

    fn theory_m(&self, frame: &Frame, s: usize) -> Result<usize> {
        let q = BoundQuery::new(s, self.p)
            .frame(frame.lower_bound(), frame.upper_bound())
            .eps(self.theory_eps);
        m_nonuniform(&q)
    }
}

/// Aggregate of one `(s, m)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub s: usize,
    pub m: usize,
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub mean_error: f64,
    pub ratio: f64,
    pub seed: u64,
    /// Trials that hit the iteration cap.
    pub solver_max_iters: usize,
    /// Trials where the solver returned an error.
    pub solver_errors: usize,
}

struct Trial {
    success: bool,
    error: f64,
    max_iters: bool,
    failed: bool,
}

fn run_trial(cfg: &ExperimentConfig, frame: &Frame, s: usize, m: usize, trial: usize) -> Result<Trial> {
    let mut rng = child(cfg.master_seed, &[s as u64, m as u64, trial as u64]);
    let signal = synth_cosparse(frame, cfg.p - s, &mut rng)?;
    let inst = gaussian_instance(frame, &signal, m, cfg.eta, &mut rng)?;
    let solved = if cfg.eta > 0.0 {
        solve_abpdn(frame, &inst.matrix, &inst.y, cfg.eta, &cfg.solver)
    } else {
        solve_abp(frame, &inst.matrix, &inst.y, &cfg.solver)
    };
    Ok(match solved {
        Ok(res) => {
            let error = (&res.z - &signal.x).norm();
            Trial {
                success: res.converged() && error < cfg.success_tol,
                error,
                max_iters: !res.converged(),
                failed: false,
            }
        }
        Err(_) => Trial {
            success: false,
            error: f64::NAN,
            max_iters: false,
            failed: true,
        },
    })
}

/// Runs every trial of one cell. Signal-generation errors (no cosparse
/// signal exists for this `s`) abort; solver errors count as failures.
pub fn run_cell(cfg: &ExperimentConfig, frame: &Frame, s: usize, m: usize) -> Result<CellResult> {
    if s == 0 || s >= cfg.p {
        return Err(Error::InvalidArgument(format!("sparsity {s} outside [1, p - 1]")));
    }
    let trials: Vec<Trial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, frame, s, m, t))
        .collect::<Result<_>>()?;
    let successes = trials.iter().filter(|t| t.success).count();
    let finite: Vec<f64> = trials.iter().map(|t| t.error).filter(|e| e.is_finite()).collect();
    let mean_error = if finite.is_empty() {
        f64::NAN
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    Ok(CellResult {
        s,
        m,
        successes,
        trials: cfg.trials,
        rate: successes as f64 / cfg.trials as f64,
        mean_error,
        ratio: frame.ratio(),
        seed: cfg.master_seed,
        solver_max_iters: trials.iter().filter(|t| t.max_iters).count(),
        solver_errors: trials.iter().filter(|t| t.failed).count(),
    })
}

/// Largest passing sparsity for one `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub m: usize,
    /// 0 when no candidate sparsity reaches the target rate.
    pub max_s: usize,
    /// Nonuniform measurement bound at `max_s` (0 when `max_s` is 0).
    pub theory_m_nonuniform: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub cells: Vec<CellResult>,
    pub frontier: Vec<FrontierPoint>,
    /// Non-decreasing least-squares fit to the raw frontier.
    pub frontier_monotone: Vec<f64>,
    pub frame_ratio: f64,
}

/// For each `m`, walks the sparsities upward and stops at the first cell
/// below the target rate. All evaluated cells are kept.
pub fn phase_curve(cfg: &ExperimentConfig) -> Result<PhaseCurve> {
    cfg.validate()?;
    let frame = cfg.frame()?;
    let s_values = cfg.s_values();
    let mut cells = Vec::new();
    let mut frontier = Vec::new();
    for m in cfg.m_values() {
        let mut max_s = 0;
        for &s in &s_values {
            let cell = run_cell(cfg, &frame, s, m)?;
            let pass = cell.rate >= cfg.success_target;
            cells.push(cell);
            if !pass {
                break;
            }
            max_s = s;
        }
        let theory = if max_s == 0 { 0 } else { cfg.theory_m(&frame, max_s)? };
        frontier.push(FrontierPoint { m, max_s, theory_m_nonuniform: theory });
    }
    let raw: Vec<f64> = frontier.iter().map(|f| f.max_s as f64).collect();
    Ok(PhaseCurve {
        cells,
        frontier,
        frontier_monotone: isotonic(&raw),
        frame_ratio: frame.ratio(),
    })
}

/// Every cell of the `s_values x m_values` grid, without early stopping.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let frame = cfg.frame()?;
    let mut cells = Vec::new();
    for s in cfg.s_values() {
        for m in cfg.m_values() {
            cells.push(run_cell(cfg, &frame, s, m)?);
        }
    }
    Ok(cells)
}

/// Pool-adjacent-violators fit of a non-decreasing sequence.
pub fn isotonic(values: &[f64]) -> Vec<f64> {
    // (mean, weight) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, wb) = blocks[blocks.len() - 1];
            let (a, wa) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let w = wa + wb;
            *blocks.last_mut().unwrap() = ((a * wa as f64 + b * wb as f64) / w as f64, w);
        }
    }
    blocks.iter().flat_map(|&(v, w)| std::iter::repeat_n(v, w)).collect()
}

pub const CURVE_HEADER: &str = "s,m,successes,trials,rate,mean_error,ratio,seed";
pub const FRONTIER_HEADER: &str = "m,max_s,theory_m_nonuniform";

pub fn write_curve<W: Write>(out: &mut W, cells: &[CellResult]) -> Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.s,
            c.m,
            c.successes,
            c.trials,
            fmt_g17(c.rate),
            fmt_g17(c.mean_error),
            fmt_g17(c.ratio),
            c.seed
        )?;
    }
    Ok(())
}

pub fn write_frontier<W: Write>(out: &mut W, frontier: &[FrontierPoint]) -> Result<()> {
    writeln!(out, "{FRONTIER_HEADER}")?;
    for f in frontier {
        writeln!(out, "{},{},{}", f.m, f.max_s, f.theory_m_nonuniform)?;
    }
    Ok(())
}

pub fn write_frontier_monotone<W: Write>(out: &mut W, curve: &PhaseCurve) -> Result<()> {
    writeln!(out, "{FRONTIER_HEADER}")?;
    for (f, v) in curve.frontier.iter().zip(&curve.frontier_monotone) {
        writeln!(out, "{},{},{}", f.m, fmt_g17(*v), f.theory_m_nonuniform)?;
    }
    Ok(())
}

/// Writes `curve.csv`, `frontier.csv` and `frontier_monotone.csv` into `dir`.
pub fn write_phase_outputs(dir: &Path, curve: &PhaseCurve) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    write_curve(&mut buf, &curve.cells)?;
    std::fs::write(dir.join("curve.csv"), &buf)?;
    buf.clear();
    write_frontier(&mut buf, &curve.frontier)?;
    std::fs::write(dir.join("frontier.csv"), &buf)?;
    buf.clear();
    write_frontier_monotone(&mut buf, curve)?;
    std::fs::write(dir.join("frontier_monotone.csv"), &buf)?;
    Ok(())
}

/// Smallest `m` in the grid whose rate reaches the target, per sparsity.
pub fn first_passing_m(cells: &[CellResult], target: f64) -> Vec<(usize, Option<usize>)> {
    let mut s_values: Vec<usize> = cells.iter().map(|c| c.s).collect();
    s_values.sort_unstable();
    s_values.dedup();
    s_values
        .into_iter()
        .map(|s| {
            let m = cells
                .iter()
                .filter(|c| c.s == s && c.rate >= target)
                .map(|c| c.m)
                .min();
            (s, m)
        })
        .collect()
}
