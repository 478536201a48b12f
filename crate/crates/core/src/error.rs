use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller supplied inconsistent or out-of-range input.
    #[error("input error: {0}")]
    Input(String),

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix not positive definite (pivot {pivot}, value {value:e})")]
    Factorization { pivot: usize, value: f64 },

    /// A simulated trajectory left its admissible range.
    #[error("divergence at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("fit error: {0}")]
    Fit(String),

    /// Dependence reward makes the fair-kernel system indefinite.
    #[error("dependence weight too large; largest admissible value found: {max_admissible:e}")]
    DependenceTooLarge { max_admissible: f64 },

    #[error("sampler health: {0}")]
    SamplerHealth(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Whether the failure stems from invalid caller input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Input(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
