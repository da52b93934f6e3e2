use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid rate vector: {0}")]
    InvalidRates(String),

    /// Cumulative processing load of classes `1..=sensor` reached 1.
    #[error(
        "processing-stage stability constraint violated at sensor {sensor}: \
         cumulative load {load:.6} is not below 1 (excess {excess:.6})",
        excess = load - 1.0
    )]
    UnstableProcessing { sensor: usize, load: f64 },

    #[error(
        "transmission-stage stability constraint violated: load {load:.6} is not below 1 \
         (excess {excess:.6})",
        excess = load - 1.0
    )]
    UnstableTransmission { load: f64 },

    #[error(
        "quadrature did not reach tolerance: estimate {estimate:e}, error {error:e} after {intervals} intervals"
    )]
    QuadratureFailure {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("normal equations of the binding constraints are singular")]
    SingularNormalEquations,
}
