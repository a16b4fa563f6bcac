use thiserror::Error;

/// Errors raised by the laboratory's solvers and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite field")]
    NonFinite,

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid atomic measure: {0}")]
    InvalidMeasure(String),

    #[error("domain mismatch between fields")]
    DomainMismatch,

    #[error("torus Biot–Savart requires zero mean (mean = {mean:e})")]
    NonZeroMean { mean: f64 },

    #[error("CFL violation: requested dt = {requested:e} exceeds stable limit; suggested dt = {suggested:e}")]
    CflViolation { requested: f64, suggested: f64 },

    #[error("particle trajectory became non-finite for seed {seed}")]
    ParticleNotFinite { seed: usize },

    #[error("flow not numerically invertible (composition defect {defect:e} > {limit:e})")]
    NotInvertible { defect: f64, limit: f64 },

    #[error("time {0} is not a sample time of the flow")]
    UnknownTime(f64),

    #[error("inadmissible renormalization: {0}")]
    InadmissibleRenormalization(String),

    #[error("inadmissible gauge: {0}")]
    InadmissibleGauge(String),

    #[error("KR norm requires zero average (imbalance {imbalance:e})")]
    Unbalanced { imbalance: f64 },

    #[error("marginal masses differ: {source_mass} vs {target_mass}")]
    MassMismatch { source_mass: f64, target_mass: f64 },

    #[error("exact solver limited to {limit} atoms per side, got {got}")]
    TooManyAtoms { limit: usize, got: usize },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
