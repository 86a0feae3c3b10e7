//! Invasion fronts in a two-competitor community where one competitor farms a
//! mutualist that shields it from competition.
//!
//! The library covers the full pipeline: the reaction terms and the two
//! monotone change-of-variables frames ([`model`]), the steady states and the
//! coexistence window ([`equilibria`]), linear spreading speeds with the
//! determinacy and cone checks ([`linear`]), a method-of-lines solver for the
//! one-dimensional diffusive system ([`solver`]), front tracking and speed
//! fits ([`speed`]), and sweep/report orchestration ([`experiment`]).

pub mod equilibria;
pub mod error;
pub mod experiment;
pub mod linear;
pub mod model;
pub mod solver;
pub mod speed;

pub use equilibria::{classify_invasion, enumerate_equilibria, EquilibriumLabel};
pub use error::{DomainError, ExperimentError, LinearError, SolverError, SpeedError};
pub use linear::{check_linear_determinacy, linear_speed};
pub use model::{ModelParams, Scenario, SystemId};
pub use solver::{simulate, SimConfig, SimScenario};
pub use speed::estimate_speeds;
