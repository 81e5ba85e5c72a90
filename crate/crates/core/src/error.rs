use thiserror::Error;

/// Errors raised anywhere in the simulation / estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarmaError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("model is not stationary: {0}")]
    NonStationary(String),
    #[error("repeated eigenvalues: {0}")]
    RepeatedEigenvalue(String),
    #[error("invalid CARMA specification: {0}")]
    Spec(String),
    #[error("invalid noise parameters: {0}")]
    Param(String),
    #[error("numerical failure{}: {message}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Numerical { message: String, step: Option<usize> },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("malformed input: {0}")]
    Input(String),
    #[error("increment recovery failed: {0}")]
    Recovery(String),
    #[error("optimizer did not converge after {iterations} iterations (best objective {best_value})")]
    Fit {
        best_params: Vec<f64>,
        best_value: f64,
        iterations: usize,
    },
}

impl CarmaError {
    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        CarmaError::Numerical {
            message: message.into(),
            step: None,
        }
    }

    pub(crate) fn numerical_at(message: impl Into<String>, step: usize) -> Self {
        CarmaError::Numerical {
            message: message.into(),
            step: Some(step),
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            CarmaError::Dimension(_) => "dimension",
            CarmaError::Domain(_) => "domain",
            CarmaError::NonStationary(_) => "non_stationary",
            CarmaError::RepeatedEigenvalue(_) => "repeated_eigenvalue",
            CarmaError::Spec(_) => "spec",
            CarmaError::Param(_) => "param",
            CarmaError::Numerical { .. } => "numerical",
            CarmaError::Unsupported(_) => "unsupported",
            CarmaError::Data(_) => "data",
            CarmaError::Input(_) => "input",
            CarmaError::Recovery(_) => "recovery",
            CarmaError::Fit { .. } => "fit",
        }
    }
}

pub type Result<T> = std::result::Result<T, CarmaError>;
