use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("{0}")]
    Cap(String),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Io { .. } | CliError::Internal(_) => 1,
        }
    }

    pub fn field(name: &str, err: impl std::fmt::Display) -> Self {
        CliError::Input(format!("field `{name}`: {err}"))
    }
}

impl From<exact_multinom::Error> for CliError {
    fn from(err: exact_multinom::Error) -> Self {
        use exact_multinom::Error as E;
        match err {
            E::SpaceTooLarge { .. } => CliError::Cap(err.to_string()),
            E::Invariant(_) => CliError::Internal(err.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Internal(format!("csv output failed: {err}"))
    }
}
