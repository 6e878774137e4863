use thiserror::Error;

/// Command failure, classified by cause. The class decides the exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    /// Wrap a library error raised while loading a configuration artifact
    /// (schema, code map, calibration table, bands, grid spec).
    pub fn config(e: invscore::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<invscore::Error> for CliError {
    fn from(e: invscore::Error) -> Self {
        use invscore::Error as E;
        match e {
            E::Schema(_) | E::CodeMap(_) | E::Calibration(_) => CliError::Config(e.to_string()),
            E::Validation(_) | E::Io { .. } => CliError::Data(e.to_string()),
            _ if e.is_data_error() => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
