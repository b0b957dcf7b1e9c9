use serde_json::json;

/// Failure of a CLI command. Usage problems exit with status 2, everything
/// else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(inr_shape::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl From<inr_shape::Error> for CliError {
    fn from(e: inr_shape::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.code(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "code": self.code(), "message": self.message() } })
    }

    pub fn report(&self) {
        eprintln!("{}", self.to_json());
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code(), self.message())
    }
}

impl std::error::Error for CliError {}
