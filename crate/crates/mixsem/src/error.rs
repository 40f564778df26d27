use std::path::PathBuf;

/// Errors raised by the file formats, drivers and CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] mixsem_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit status for a failure.
pub fn exit_code(e: &Error) -> i32 {
    use mixsem_core::Error as C;
    match e {
        Error::Core(C::Numerical { .. } | C::Singular(_) | C::TooManyFailures { .. }) => 4,
        Error::Core(_) | Error::Csv { .. } | Error::Config { .. } | Error::Invalid(_) => 2,
        Error::Io { .. } => 2,
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
