use thiserror::Error;

/// Errors produced by grid construction, operator assembly, solves and inversion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("ellipticity violated at node {node}: eigenvalues [{min_eig:.3e}, {max_eig:.3e}] outside [{gamma:.3e}, {inv_gamma:.3e}]")]
    Ellipticity {
        node: usize,
        min_eig: f64,
        max_eig: f64,
        gamma: f64,
        inv_gamma: f64,
    },

    #[error("tensor field is not symmetric at node {node} (asymmetry {asymmetry:.3e})")]
    Asymmetric { node: usize, asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("ill-posed scenario: sigma_min / sigma_max = {ratio:.3e} (threshold {threshold:.1e})")]
    IllPosed { ratio: f64, threshold: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Ellipticity { .. }
            | Error::Asymmetric { .. }
            | Error::DimensionMismatch { .. }
            | Error::Json(_) => 2,
            Error::IllPosed { .. } => 3,
            Error::Numerical(_) | Error::Io(_) => 4,
        }
    }
}

pub(crate) fn check_len(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
