use ricci_lab::LabError;
use serde_json::{json, Value};

/// Everything that stops a run before a verdict. Each variant maps to one
/// exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse { message: String, line: usize, column: usize },
    Config(String),
    Lab(LabError),
    Output(std::io::Error),
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Lab(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } | CliError::Config(_) => 2,
            CliError::Lab(e) => match e {
                LabError::InvalidInput(_) | LabError::UnsupportedGeometry(_) | LabError::CapExceeded { .. } => 2,
                _ => 3,
            },
            CliError::Output(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Parse { .. } => "parse",
            CliError::Config(_) => "config",
            CliError::Lab(e) => match e {
                LabError::InvalidInput(_) => "invalid_input",
                LabError::UnsupportedGeometry(_) => "unsupported_geometry",
                LabError::CapExceeded { .. } => "cap_exceeded",
                LabError::Numeric(_) => "numeric",
                LabError::Evaluation(_) => "evaluation",
                LabError::Construction { .. } => "construction",
                LabError::SupportViolation(_) => "support_violation",
                LabError::Io(_) | LabError::Csv(_) | LabError::Json(_) => "io",
            },
            CliError::Output(_) => "io",
        }
    }

    /// The one-object diagnostic written to stderr.
    pub fn to_json(&self) -> Value {
        let message = match self {
            CliError::Usage(m) | CliError::Config(m) => m.clone(),
            CliError::Parse { message, .. } => message.clone(),
            CliError::Lab(e) => e.to_string(),
            CliError::Output(e) => e.to_string(),
        };
        let mut v = json!({"error": self.kind(), "message": message, "exit_code": self.exit_code()});
        if let CliError::Parse { line, column, .. } = self {
            v["line"] = json!(line);
            v["column"] = json!(column);
        }
        v
    }
}
