use std::path::PathBuf;

/// Failure classes of the command-line tool. Each maps to its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] cellquad_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 config, 3 data (including IO), 4 validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io { .. } | Error::Image { .. } => 3,
            Error::Validation(_) => 4,
            Error::Core(e) => match e {
                cellquad_core::Error::InvalidConfig(_)
                | cellquad_core::Error::InvalidFoldCount(_)
                | cellquad_core::Error::FoldIndexOutOfRange { .. }
                | cellquad_core::Error::InvalidFraction(_)
                | cellquad_core::Error::InvalidPercentiles { .. }
                | cellquad_core::Error::UnknownClass(_)
                | cellquad_core::Error::ClassSetMismatch(_) => 2,
                _ => 3,
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
