use std::path::PathBuf;

use cvmbqc_core::Lattice;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cvmbqc_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// No optimized basis for a requested point.
    #[error(
        "no cached {kind} basis for {lattice} at {db} dB; run `cvmbqc optimize --lattice {lattice}{flag} --db {db}`",
        kind = if *variable_theta_c { "variable-control" } else { "controlled-Z" },
        flag = if *variable_theta_c { " --variable-theta-c" } else { "" }
    )]
    CacheMiss { lattice: Lattice, db: f64, variable_theta_c: bool },

    #[error("basis table {path}: {reason}")]
    BadCache { path: PathBuf, reason: String },

    #[error("{0}")]
    Usage(String),

    #[error("{0} check(s) failed")]
    VerificationFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerificationFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::CacheMiss { .. } | CliError::BadCache { .. } => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
