use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integration exceeded {steps} steps without a terminal event")]
    StepLimitExceeded { steps: usize },

    #[error("shooting failed: {0}")]
    ShootFailed(String),

    #[error("b = {b} is not below P(gamma) = {gamma}: trajectory escapes instead of closing")]
    NotInS1 { b: f64, gamma: f64 },

    #[error("b = {b} at gamma = {gamma} does not yield a tadpole: trajectory does not return to the origin")]
    NotInS2 { b: f64, gamma: f64 },

    #[error("root bracket failed on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    BracketFailed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("consistency check failed: {0}")]
    ConsistencyFailed(String),

    #[error("regime error: {0}")]
    RegimeError(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("numerical blowup at t = {t}: sup|u| = {sup}")]
    NumericalBlowup { t: f64, sup: f64 },

    #[error("window [{lo}, {hi}] leaves the domain [{g}, {h}]")]
    WindowExceedsDomain { lo: f64, hi: f64, g: f64, h: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no upper-class verdict up to sigma_max = {sigma_max}")]
    NoUpperClassFound { sigma_max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
