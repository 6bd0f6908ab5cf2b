use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] graphot_core::Error),
    #[error("grid with h = {h} does not resolve {what} = {value}")]
    GridMisaligned { h: f64, what: &'static str, value: f64 },
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("unknown suite `{0}`")]
    SubcommandUnknown(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn parse(path: impl AsRef<std::path::Path>, message: impl ToString) -> Self {
        Self::Parse { path: path.as_ref().display().to_string(), message: message.to_string() }
    }
}
