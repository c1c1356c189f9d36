use thiserror::Error;

/// Errors produced by the gap-coordinate, frame and dynamics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension must be at least 2 (got {0})")]
    Dimension(usize),

    #[error("dimension {0} exceeds the supported maximum of {1}")]
    DimensionTooLarge(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid probability vector: {0}")]
    InvalidProbs(String),

    #[error("gap vector outside the weighted simplex: {0}")]
    OutsidePolytope(String),

    #[error("degenerate crossover: p_{index} is within tolerance of 1/n")]
    DegenerateCrossover { index: usize },

    #[error("singular metric: p_{index} = {value:e}")]
    SingularMetric { index: usize, value: f64 },

    #[error("zero probability at index {0}")]
    ZeroProbability(usize),

    #[error("degenerate spectrum: minimum gap {min_gap:e}")]
    DegenerateSpectrum { min_gap: f64 },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid angle: {0}")]
    InvalidAngle(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid unitary frame: {0}")]
    InvalidFrame(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("chart singularity: {0}")]
    ChartSingularity(String),

    #[error("positivity violated at t = {t}: min eigenvalue {min_eig:e}")]
    Positivity { t: f64, min_eig: f64 },

    #[error("spectral chart breakdown at t = {t}: min gap {min_gap:e}")]
    Breakdown { t: f64, min_gap: f64 },

    #[error("invalid integration parameters: {0}")]
    Integration(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures that come from the numerics (degeneracy, positivity)
    /// rather than from malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateCrossover { .. }
                | Error::SingularMetric { .. }
                | Error::ZeroProbability(_)
                | Error::DegenerateSpectrum { .. }
                | Error::ChartSingularity(_)
                | Error::Positivity { .. }
                | Error::Breakdown { .. }
                | Error::Overflow(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
