use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid arm model: {0}")]
    InvalidArm(String),

    #[error("invalid limit schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid margin parameters: {0}")]
    InvalidMargin(String),

    #[error("joint bound is exactly zero ({lo}, {hi}); no sign case applies")]
    DegenerateBound { lo: f64, hi: f64 },

    #[error("bounds ({lo}, {hi}) do not match margin case {case}")]
    CaseMismatch { case: &'static str, lo: f64, hi: f64 },

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("QP assembly: {0}")]
    Assembly(String),

    #[error("box is inverted at index {index}: lower {lower} > upper {upper}")]
    InfeasibleBox { index: usize, lower: f64, upper: f64 },

    #[error("projection iteration stalled: sigma vanished with residual {residual}")]
    SolverStall { residual: f64 },

    #[error("dynamic solver diverged at pseudo-time {time}: residual {residual}")]
    SolverDiverged { time: f64, residual: f64 },

    #[error("no feasible active-set pattern")]
    Infeasible,

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("config key `{key}`: {message}")]
    ConfigKey { key: String, message: String },

    #[error("config: {0}")]
    ConfigSyntax(String),

    #[error("solver failed at t = {time:.4} s: {message}")]
    SolverFailure { time: f64, message: String },

    #[error("velocity window inverted on joint {joint} at t = {time:.4} s")]
    InvertedWindow { joint: usize, time: f64 },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
