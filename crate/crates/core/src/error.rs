use thiserror::Error;

/// Errors raised while building or evaluating the model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("influence function evaluated at negative distance {0}")]
    NegativeDistance(f64),
    #[error("invalid influence function: {0}")]
    InvalidInfluence(String),
    #[error("invalid delay specification: {0}")]
    InvalidDelay(String),
    #[error("invalid delay kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("at least two agents are required, got {0}")]
    TooFewAgents(usize),
    #[error("kernel normalizer h({t}) = {value} is not positive")]
    NonPositiveNormalizer { t: f64, value: f64 },
    #[error(transparent)]
    History(#[from] HistoryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error("lookup at t = {t} outside the recorded range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("append at t = {t_new} does not advance past t_now = {t_now}")]
    NonMonotone { t_new: f64, t_now: f64 },
    #[error("state length {got} does not match the expected {expected}")]
    ShapeMismatch { got: usize, expected: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("weight schedule evaluated at negative time {0}")]
    NegativeTime(f64),
    #[error("invalid weight schedule: {0}")]
    Invalid(String),
    #[error("verification horizon {horizon} is shorter than the window length {window}")]
    HorizonTooShort { horizon: f64, window: f64 },
    #[error("persistence of excitation fails: worst window [{start}, {start}+T] integrates to {worst}, below the declared {declared}")]
    PeViolated {
        worst: f64,
        start: f64,
        declared: f64,
    },
    #[error("breakpoints {0} and {1} are closer than 1e-12")]
    DegenerateSchedule(f64, f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("non-finite state at t = {t} (agent {agent})")]
    NonFinite { t: f64, agent: usize },
    #[error("invalid integrator settings: {0}")]
    InvalidSettings(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("theory constants unavailable: {0}")]
    ConstantsUnavailable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Scenario parsing failures carry the dotted path of the offending field.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    pub fn parse(path: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
