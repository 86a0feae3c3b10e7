//! Error types shared across the crate.

use crate::model::SystemId;
use thiserror::Error;

/// Violation of a mathematical precondition on parameters or states.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("parameter `{name}` must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    /// A state-dependent denominator is zero, negative, or too close to zero
    /// for the reaction term to be evaluated reliably.
    #[error("{system}: denominator {name} = {value:e} is not safely positive")]
    SingularDenominator {
        system: SystemId,
        name: &'static str,
        value: f64,
    },
    #[error("{system} expects {expected} coordinates, got {got}")]
    CoordinateMismatch {
        system: SystemId,
        expected: &'static str,
        got: &'static str,
    },
    #[error("vector must be strictly positive; component {index} is {value}")]
    NonpositiveComponent { index: usize, value: f64 },
    #[error("state component {index} is not finite")]
    NonFiniteState { index: usize },
}

/// Errors from the linearized (spreading-speed) analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearError {
    /// The principal eigenvalue collides with another block eigenvalue, so
    /// the closed-form eigenvector is ill-conditioned.
    #[error("eigenvalue gap |gamma1 - gamma{index}| = {gap:e} is below tolerance; principal eigenvector is undefined")]
    DegenerateEigenvalue { index: usize, gap: f64 },
    /// The invasion condition fails: the growth rate of the invading block
    /// at zero wavenumber is not positive. Carries that rate.
    #[error("not invadable: principal growth rate at mu = 0 is {gamma1_at_zero}")]
    NotInvadable { gamma1_at_zero: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Errors from the method-of-lines simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("solution blew up at t = {t}: species {species}, node {node}, value {value:e} (limit {limit:e})")]
    Stability {
        t: f64,
        species: usize,
        node: usize,
        value: f64,
        limit: f64,
    },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Errors from front tracking and speed regression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpeedError {
    #[error("level {level} is not strictly between the source value {source_value} and target value {target_value}")]
    Level {
        level: f64,
        source_value: f64,
        target_value: f64,
    },
    #[error("need at least {needed} front samples inside the window, best species had {found}")]
    InsufficientSamples { needed: usize, found: usize },
}

/// Top-level error for experiment orchestration and the CLI.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Speed(#[from] SpeedError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// Process exit code: 1 config, 2 numerical, 3 i/o.
    pub fn exit_code(&self) -> u8 {
        match self {
            ExperimentError::Config(_) => 1,
            ExperimentError::Solver(SolverError::Config(_)) => 1,
            ExperimentError::Domain(DomainError::InvalidParameter { .. }) => 1,
            ExperimentError::Io(_) => 3,
            _ => 2,
        }
    }
}
