use thiserror::Error;

/// Errors shared across the simulator and verification layers.
#[derive(Debug, Error)]
pub enum MvError {
    #[error("input field contains non-finite values")]
    InvalidField,
    #[error("spectral field is not conjugate-symmetric (imaginary residue {residue:.3e})")]
    NotRealField { residue: f64 },
    #[error("mean mode must be zero for this operator (|c0| = {mean:.3e})")]
    MeanNotZero { mean: f64 },
    #[error("ball radius {r} outside the valid range {lo}..{hi}")]
    InvalidRadius { r: f64, lo: f64, hi: f64 },
    #[error("invalid Lebesgue/Besov exponents: {0}")]
    InvalidExponents(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time {t} outside the configured window [0, {t_final}]")]
    OutOfWindow { t: f64, t_final: f64 },
    #[error("unit-magnetization constraint drifted to {residual:.3e}")]
    ConstraintDrift { residual: f64 },
    #[error("CFL condition violated: dt = {dt:.3e} exceeds limit {limit:.3e}")]
    StepRejected { dt: f64, limit: f64 },
    #[error("numerical blow-up detected at t = {t}")]
    NumericalBlowup { t: f64, indicator_history: Vec<(f64, f64)> },
    #[error("magnetization magnitude collapsed below threshold (min |M| = {min_norm:.3e})")]
    MagnetizationCollapse { min_norm: f64 },
    #[error("states are incompatible: {0}")]
    IncompatibleStates(String),
    #[error("velocity field is not divergence-free (residual {residual:.3e})")]
    NotSolenoidal { residual: f64 },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("config error at line {line}: {message}")]
    ConfigError { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MvError>;
