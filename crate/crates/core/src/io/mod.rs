//! Configuration, CSV files and the command-line subcommands.

pub mod commands;
pub mod config;
pub mod csv;

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::experiments::PipelineError;
use crate::reconstruction::ReconstructError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{0}")]
    Format(String),
}

impl IoError {
    pub fn file(path: &Path, source: std::io::Error) -> Self {
        IoError::File { path: path.display().to_string(), source }
    }
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    /// Bad configuration, flags or input files.
    Config = 2,
    /// Forward solve failed (non-convergence, singular Jacobian, energy bound).
    Forward = 3,
    /// No regularization weight reaches the declared noise level.
    UnderResolved = 4,
    /// No monotone segment on Γ₁, or V is empty after trimming or comparison.
    NoMonotoneSegment = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: ExitCode::Config, message: message.into() }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::config(format!("io: {e}"))
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::config(format!("config: {e}"))
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Forward(_) => ExitCode::Forward,
            PipelineError::UnderResolved { .. } => ExitCode::UnderResolved,
            PipelineError::Reconstruction(
                ReconstructError::NoMonotoneSegment(_) | ReconstructError::EmptyInterval { .. } | ReconstructError::Disjoint,
            ) => {
                ExitCode::NoMonotoneSegment
            }
            PipelineError::Reconstruction(_) => ExitCode::Config,
            PipelineError::Geometry(_) | PipelineError::Continuation(_) | PipelineError::Config(_) => ExitCode::Config,
        };
        CliError { code, message: e.to_string() }
    }
}
