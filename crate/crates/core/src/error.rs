use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape error: {0}")]
    InputShape(String),

    /// A differential detector divided by a zero (catastrophically faded) carrier.
    #[error("degenerate denominator at carrier {carrier}")]
    DegenerateDivision { carrier: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("framing error: expected {expected} samples, got {actual}")]
    Framing { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("estimator diverged after {} outer iterations", trace.len())]
    EstimatorDiverged { trace: Vec<f64> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
