//! Command-line front end and local HTTP service over `hyperscen-core`.

pub mod commands;
pub mod service;

use std::fmt;

/// Outcome of a failed command, split by who is at fault.
#[derive(Debug)]
pub enum Failure {
    /// Bad input or usage; exit code 1.
    User(String),
    /// Anything else; exit code 2.
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::User(_) => 1,
            Failure::Internal(_) => 2,
        }
    }

    pub fn user(e: impl fmt::Display) -> Self {
        Failure::User(e.to_string())
    }

    pub fn internal(e: impl fmt::Display) -> Self {
        Failure::Internal(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::User(m) | Failure::Internal(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}
