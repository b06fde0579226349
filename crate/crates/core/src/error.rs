use thiserror::Error;

/// Errors raised by the recovery toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not a frame: lower bound {lower:e} below rank tolerance (upper bound {upper:e})")]
    NotAFrame { lower: f64, upper: f64 },

    #[error("degenerate random draw: rank-deficient matrix after {attempts} attempts")]
    DegenerateDraw { attempts: usize },

    #[error("cosupport of size {cosparsity} leaves an empty kernel (d = {d})")]
    EmptyKernel { cosparsity: usize, d: usize },

    #[error("measurement matrix is rank deficient: rank {rank} < {expected}")]
    RankDeficientM { rank: usize, expected: usize },

    #[error("rejection sampling stalled: accepted {accepted} of {wanted} directions in {proposals} proposals")]
    RejectionStall {
        accepted: usize,
        wanted: usize,
        proposals: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable code, used by the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotAFrame { .. } => "not_a_frame",
            Error::DegenerateDraw { .. } => "degenerate_draw",
            Error::EmptyKernel { .. } => "empty_kernel",
            Error::RankDeficientM { .. } => "rank_deficient_m",
            Error::RejectionStall { .. } => "rejection_stall",
            Error::Dimension(_) => "dimension",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
