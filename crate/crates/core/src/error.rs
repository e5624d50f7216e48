//! Error type shared across the crate.

use std::fmt;

/// Everything that can go wrong between reading a series and printing a verdict.
#[derive(Debug)]
pub enum GofError {
    /// Underlying I/O failure while reading or writing series / tables.
    Io(std::io::Error),
    /// A data file or configuration could not be parsed.
    Parse(String),
    /// A function was evaluated outside its mathematical domain.
    Domain(String),
    /// A parameter vector lies outside the family's admissible box.
    InvalidParameter(String),
    /// The observed series is too short for the requested procedure.
    SeriesTooShort { len: usize, min: usize },
    /// The Whittle objective could not be minimized.
    EstimationFailure(String),
    /// The recursive least-squares transform broke down.
    TransformFailure(String),
    /// Input that is formally valid but numerically useless (all zeros, NaNs, ...).
    DegenerateInput(String),
    /// A Monte Carlo or critical-value configuration is inconsistent.
    InvalidConfig(String),
}

impl fmt::Display for GofError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GofError::Io(e) => write!(f, "i/o error: {e}"),
            GofError::Parse(msg) => write!(f, "parse error: {msg}"),
            GofError::Domain(msg) => write!(f, "domain error: {msg}"),
            GofError::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            GofError::SeriesTooShort { len, min } => {
                write!(f, "series too short: {len} observations, need at least {min}")
            }
            GofError::EstimationFailure(msg) => write!(f, "estimation failure: {msg}"),
            GofError::TransformFailure(msg) => write!(f, "transform failure: {msg}"),
            GofError::DegenerateInput(msg) => write!(f, "degenerate input: {msg}"),
            GofError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for GofError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            GofError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for GofError {
    fn from(e: std::io::Error) -> Self {
        GofError::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, GofError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_informative() {
        let e = GofError::SeriesTooShort { len: 3, min: 8 };
        let msg = e.to_string();
        assert!(msg.contains('3') && msg.contains('8'));

        let e = GofError::Domain("spectral density pole at frequency 0".into());
        assert!(e.to_string().contains("pole"));
    }

    #[test]
    fn io_errors_convert() {
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "missing");
        let e: GofError = io.into();
        assert!(matches!(e, GofError::Io(_)));
    }
}
