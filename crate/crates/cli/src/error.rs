use std::fmt;

use dyadml::DyadError;

/// A failure printed as `error[code]: detail`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: &'static str,
    pub detail: String,
}

impl CliError {
    pub fn new(code: &'static str, detail: impl Into<String>) -> Self {
        Self { code, detail: detail.into() }
    }

    pub fn usage(detail: impl Into<String>) -> Self {
        Self::new("usage", detail)
    }

    pub fn config(detail: impl Into<String>) -> Self {
        Self::new("config", detail)
    }

    pub fn io(detail: impl Into<String>) -> Self {
        Self::new("io", detail)
    }

    pub fn record(detail: impl Into<String>) -> Self {
        Self::new("record", detail)
    }

    /// Process exit status: 2 for usage and configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.code {
            "usage" | "config" => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail = self.detail.replace('\n', " ");
        write!(f, "error[{}]: {}", self.code, detail)
    }
}

impl std::error::Error for CliError {}

impl From<DyadError> for CliError {
    fn from(e: DyadError) -> Self {
        let code = match e {
            DyadError::MissingDyad(..)
            | DyadError::DuplicateDyad(..)
            | DyadError::SelfLink(_)
            | DyadError::CovariateLength { .. }
            | DyadError::NonBinaryOutcome { .. }
            | DyadError::TooFewNodes(_)
            | DyadError::EmptyDyadSet => "data",
            DyadError::InvalidArgument(_) | DyadError::Shape(_) => "input",
            _ => "estimation",
        };
        CliError::new(code, e.to_string())
    }
}
