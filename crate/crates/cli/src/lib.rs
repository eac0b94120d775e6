//! Library side of the `riskshare` command-line tool.

pub mod commands;
pub mod scenario;

use serde_json::json;

/// Errors surfaced by the CLI, each with a stable code and exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] riskshare_core::Error),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Io(_) => "Io",
            CliError::Parse(_) => "ParseError",
        }
    }

    /// 1 for I/O, 3 for unsupported regimes, 4 for grid incompatibility, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        use riskshare_core::Error as E;
        match self {
            CliError::Io(_) => 1,
            CliError::Core(
                E::UnsupportedRegime(_) | E::NotConcave(_) | E::NotLocationInvariant(_),
            ) => 3,
            CliError::Core(E::GridIncompatible { .. }) => 4,
            _ => 2,
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.code(), "message": self.to_string() });
        if let CliError::Core(riskshare_core::Error::GridIncompatible { n, suggested, .. }) = self {
            v["n"] = json!(n);
            v["suggested_n"] = json!(suggested);
        }
        v
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
