use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Domain(#[from] infoest::Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(field: impl AsRef<str>, msg: impl AsRef<str>) -> Self {
        CliError::Config(format!("field `{}`: {}", field.as_ref(), msg.as_ref()))
    }

    /// 2 for configuration problems, 3 for failures during a run.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 3,
        }
    }
}
