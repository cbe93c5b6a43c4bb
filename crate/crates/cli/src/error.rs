use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run failed: {0}")]
    Run(String),
    #[error("i/o error on {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("csv error on {0}: {1}")]
    Csv(String, #[source] csv::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(path.display().to_string(), e)
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(ConfigError::Invalid(msg.into()))
}
