use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quadrature did not converge on [{a}, {b}]: estimate {value:e}, error {error:e}")]
    Quadrature {
        a: f64,
        b: f64,
        value: f64,
        error: f64,
    },

    #[error("point is not critical: |grad V| = {grad_norm:e} exceeds {tolerance:e}")]
    NotCritical { grad_norm: f64, tolerance: f64 },

    #[error("sample time {time} lies outside the causal window (T_window = {window})")]
    CausalWindow { time: f64, window: f64 },

    #[error("degenerate data for decay fit: {0}")]
    DegenerateFit(String),

    #[error("time step {dt} violates the stability bound: {reason}")]
    UnstableStep { dt: f64, reason: String },

    #[error("blow-up at t = {time}: norm {norm:e} exceeds {limit:e}")]
    BlowUp { time: f64, norm: f64, limit: f64 },

    #[error("frequency grid too coarse for t = {time}: Nyquist limit is {limit}")]
    Nyquist { time: f64, limit: f64 },

    #[error("singular matrix M(lambda): |b| = {abs_b:e}")]
    Resonance { abs_b: f64 },

    #[error("potential is not isotropic at the critical point: {0}")]
    Anisotropic(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
