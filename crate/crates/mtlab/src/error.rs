use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("well-curvedness violated at t = {t}: |det| = {det:.3e} < floor {floor:.3e}")]
    WellCurvedViolation { t: f64, det: f64, floor: f64 },
    #[error("Fourier support leaks outside theta/4: relative energy {leakage:.3e}")]
    SupportViolation { leakage: f64 },
    #[error("quadrature under-resolved: {0}")]
    QuadratureError(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("packing infeasible: {0}")]
    PackingError(String),
    #[error("construction stalled after {achieved} balls (target {target})")]
    ConstructionError { achieved: usize, target: usize },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
