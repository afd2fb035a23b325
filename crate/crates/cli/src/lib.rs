//! Library side of the `sheq` command-line harness: config resolution,
//! measure grammar, output writers, the parallel replicate driver and the
//! validation campaign.  The binary in `main.rs` is a thin dispatcher over
//! these modules, and the acceptance test suite drives the same validation
//! functions the `validate` subcommand runs.

// `!(x > 0.0)` rejects NaN inputs too; see the core crate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod measure_arg;
pub mod output;
pub mod parallel;
pub mod validate;

/// Exit codes are a stable contract: 0 success, 1 validation failure,
/// 2 configuration error, 3 numerical divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    ValidationFailure,
    ConfigError,
    Divergence,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        match self {
            Self::Success => 0,
            Self::ValidationFailure => 1,
            Self::ConfigError => 2,
            Self::Divergence => 3,
        }
    }
}

/// Harness-level error carrying the exit class and a human message.
#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { status: ExitStatus::ConfigError, message: message.into() }
    }

    pub fn divergence(message: impl Into<String>) -> Self {
        Self { status: ExitStatus::Divergence, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self { status: ExitStatus::ConfigError, message: format!("io error: {e}") }
    }
}

impl From<sheq_core::moments::MomentError> for CliError {
    fn from(e: sheq_core::moments::MomentError) -> Self {
        use sheq_core::moments::MomentError;
        let status = match e {
            MomentError::Divergent | MomentError::Quadrature => ExitStatus::Divergence,
            _ => ExitStatus::ConfigError,
        };
        Self { status, message: e.to_string() }
    }
}

impl From<sheq_core::measure::MeasureError> for CliError {
    fn from(e: sheq_core::measure::MeasureError) -> Self {
        use sheq_core::measure::MeasureError;
        let status = match e {
            MeasureError::DivergentJ0 | MeasureError::QuadratureFailure | MeasureError::Overflow => {
                ExitStatus::Divergence
            }
            _ => ExitStatus::ConfigError,
        };
        Self { status, message: e.to_string() }
    }
}

impl From<sheq_core::sim::SimError> for CliError {
    fn from(e: sheq_core::sim::SimError) -> Self {
        use sheq_core::sim::SimError;
        let status = match e {
            SimError::NumericalBlowup { .. } => ExitStatus::Divergence,
            SimError::Measure(sheq_core::measure::MeasureError::DivergentJ0) => ExitStatus::Divergence,
            _ => ExitStatus::ConfigError,
        };
        Self { status, message: e.to_string() }
    }
}
