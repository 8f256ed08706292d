use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("grazing wavevector: diffraction order {order:?} has k_z = 0; shift k_perp by a small amount")]
    Grazing { order: (i32, i32) },

    #[error("lattice sum did not converge: extrapolation residual {residual:.3e} exceeds {tolerance:.3e}")]
    NonConvergence { residual: f64, tolerance: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lattice too small: extent {extent} < 4 w = {required}")]
    LatticeTooSmall { extent: f64, required: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("integrator: {0}")]
    Integrator(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("kernel cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: &str, msg: impl Into<String>) -> Self {
        Error::Config { key: key.to_string(), msg: msg.into() }
    }

    /// Process exit code used by the command-line tool: 2 for bad input,
    /// 3 for numerical failures, 4 for failed consistency checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::InvalidArgument(_)
            | Error::LatticeTooSmall { .. }
            | Error::Shape(_)
            | Error::Io(_) => 2,
            Error::Consistency(_) | Error::Regime(_) => 4,
            _ => 3,
        }
    }
}
