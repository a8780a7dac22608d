use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Malformed file content. `offset` is the byte offset of the first
    /// offending byte when it is known.
    #[error("{format} format error at byte {offset}: {message}")]
    Format {
        format: &'static str,
        offset: usize,
        message: String,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("step {step}{}: {source}", frame.map(|f| format!(", frame {f}")).unwrap_or_default())]
    Step {
        step: usize,
        frame: Option<i64>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(format: &'static str, offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            format,
            offset,
            message: message.into(),
        }
    }

    /// Attach pipeline step context.
    pub fn at_step(self, step: usize, frame: Option<i64>) -> Self {
        Error::Step {
            step,
            frame,
            source: Box::new(self),
        }
    }

    /// True when the error stems from bad user input rather than an internal failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::Dimension(_) | Error::Format { .. } | Error::Json(_) => true,
            Error::Io(e) => e.kind() == std::io::ErrorKind::NotFound,
            Error::Step { source, .. } => source.is_validation(),
        }
    }
}
