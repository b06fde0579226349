//! Recovery of cosparse signals by analysis l1-minimization.
//!
//! Signals `x` in `R^d` are sparse after applying an analysis operator
//! (a frame) `omega`; they are measured by a Gaussian matrix `M` and
//! recovered by minimizing `||omega z||_1` subject to `M z = y` (or
//! `||M z - y||_2 <= eta`). The modules cover frames, signal and instance
//! generation, the solver with its optimality certificate, closed-form
//! measurement bounds, Gaussian-width estimators, null space property
//! falsifiers and phase-transition experiments.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod frames;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod model;
pub mod nsp;
pub mod rng;
pub mod solver;
pub mod stats;

pub use bounds::{BoundQuery, ErrorBounds, NoisyBound, RobustBound, TauForm};
pub use error::{Error, Result};
pub use experiments::{CellResult, ExperimentConfig, FrameSpec, FrontierPoint, MGrid, PhaseCurve};
pub use frames::{Frame, FrameMeta};
pub use geometry::{EscapeEstimate, TangentConeSampler};
pub use model::{CosparseSignal, SensingInstance};
pub use nsp::{NspQuery, NspReport, NspStatus, NspVariant, NspWitness};
pub use solver::{SolveResult, SolveStatus, SolverOptions, TraceRow};
pub use stats::WidthEstimate;
