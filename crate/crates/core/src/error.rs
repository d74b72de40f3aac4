use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates one of its invariants.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("no sign change of the event function on [{t_lo}, {t_hi}]")]
    NoEvent { t_lo: f64, t_hi: f64 },

    #[error("event bracket did not shrink below {tolerance} s within {max_bisections} bisections")]
    EventTolerance { tolerance: f64, max_bisections: u32 },

    /// The integrated state became non-finite. Carries the last finite state.
    #[error("numeric blow-up at t = {t} s (last good state {last_good:?})")]
    NumericBlowUp { t: f64, last_good: Vec<f64> },

    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    ConfigValue { key: String, message: String },

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
