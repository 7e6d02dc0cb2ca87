use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("eigenvalue iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("time ordering violated: {0}")]
    Ordering(String),

    #[error("unsupported correlation event: {0}")]
    UnsupportedEvent(String),

    #[error("invalid window: {0}")]
    Window(String),

    #[error("no signal: {0}")]
    NoSignal(String),

    #[error("no counts: {0}")]
    NoCounts(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
