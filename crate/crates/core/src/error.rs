use thiserror::Error;

/// Errors produced anywhere in the codec toolkit.
///
/// Variants are grouped so that callers (the CLI in particular) can map
/// them onto coarse failure classes without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed bytes or text: bad magic, unparsable header fields.
    #[error("format error: {0}")]
    Format(String),
    /// Well-formed input whose parts do not fit together.
    #[error("structure error: {0}")]
    Structure(String),
    #[error("range error: {0}")]
    Range(String),
    /// Input too small for the requested transform depth.
    #[error("size error: {0}")]
    Size(String),
    #[error("budget error: {0}")]
    Budget(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }
}
