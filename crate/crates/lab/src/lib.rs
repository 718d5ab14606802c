//! Experiment runner for the oseledets-core laboratory: configuration,
//! orchestration, seeded Monte Carlo, tail-index estimation, and bit-stable
//! result emission.

pub mod config;
pub mod hill;
pub mod output;
pub mod runner;

use std::fmt;

use oseledets_core::CoreError;

/// Runner errors, split by exit code: configuration problems exit 2,
/// failed assertions in check kinds exit 3.
#[derive(Debug)]
pub enum LabError {
    Config(String),
    Check(String),
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabError::Config(msg) => write!(f, "config error: {msg}"),
            LabError::Check(msg) => write!(f, "check failed: {msg}"),
        }
    }
}

impl std::error::Error for LabError {}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Check(_) => 3,
        }
    }
}

impl From<CoreError> for LabError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter(_) => LabError::Config(e.to_string()),
            other => LabError::Check(other.to_string()),
        }
    }
}
