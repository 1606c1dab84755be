use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: exit code 1.
    #[error("{0}")]
    Validation(String),
    /// The computation broke down: exit code 2.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<hqtn::Error> for CliError {
    fn from(e: hqtn::Error) -> Self {
        use hqtn::Error as E;
        match e {
            E::NumericalFailure(_)
            | E::DegenerateStructure(_)
            | E::DegenerateInput(_)
            | E::KernelCompletion(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("json error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(format!("csv error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
