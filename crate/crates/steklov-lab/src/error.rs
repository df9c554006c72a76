use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series resolution error: tail ratio {tail_ratio:.3e} exceeds {limit:.1e} at degree {degree}")]
    Resolution {
        tail_ratio: f64,
        limit: f64,
        degree: usize,
    },

    #[error("integration error near x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("pole proximity at z = {z}: log|Delta| sits {log_gap:.2} below the solution scale (omega near the Dirichlet spectrum)")]
    PoleProximity { z: f64, log_gap: f64 },

    #[error("expansion order {0} exceeds the supported maximum of 10")]
    Order(usize),

    #[error("exponent sequence violates the gap condition at index {index}: gap {gap}")]
    Sequence { index: usize, gap: f64 },

    #[error("rate fit invalid: {0}")]
    FitInvalid(String),

    #[error(
        "kernel iteration did not converge after {iterations} sweeps (last change {change:.3e})"
    )]
    Iteration { iterations: usize, change: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Neumann series stalled at term {term} (norm {norm:.3e})")]
    Inversion { term: usize, norm: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("endpoint mismatch, operator-norm difference diverges: {0}")]
    Diverging(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl LabError {
    /// Short pipeline stage label used in CLI diagnostics.
    pub fn stage(&self) -> &'static str {
        match self {
            LabError::Domain(_) | LabError::Resolution { .. } => "geometry",
            LabError::Integration { .. } | LabError::PoleProximity { .. } => "ode",
            LabError::Order(_) => "asymptotics",
            LabError::Sequence { .. } => "muntz",
            LabError::FitInvalid(_) => "compare",
            LabError::Iteration { .. } | LabError::Dimension(_) | LabError::Inversion { .. } => {
                "transform"
            }
            LabError::Precondition(_) | LabError::Diverging(_) => "stability",
            LabError::Config(_) => "config",
            LabError::Io(_) => "io",
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, LabError::Config(_))
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
