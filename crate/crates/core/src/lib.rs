//! Stochastic reaching-movement model: Gaussian belief propagation under
//! signal-dependent torque noise, expected-reward trajectory optimization,
//! goal inference from partial observations, Fitts'-law analysis, a
//! Gaussian-process transition-point model and simulated co-manipulation
//! scenarios.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod kinematics;
pub mod planner;
pub mod reward;
pub mod rollout;
pub mod scenarios;
pub mod solver;
pub mod transition;

pub use config::ExperimentConfig;
pub use dynamics::{DiscreteLti, NoiseForm, NoiseModel, PlantModel, StateGaussian};
pub use kinematics::Kinematics;
pub use planner::{CostParams, PlanResult};
pub use reward::GoalSpec;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("inertia matrix is singular at configuration {config:?}")]
    SingularInertia { config: Vec<f64> },
    #[error("invalid goal: {0}")]
    InvalidGoal(String),
    #[error("matrix is numerically singular (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("objective evaluated to a non-finite value")]
    NonFiniteObjective,
    #[error("observation constraint could not be met (best residual {residual:.3e})")]
    ConstraintInfeasible { residual: f64 },
    #[error("trajectory never settles near the goal")]
    MovementIncomplete,
    #[error("degenerate regression: fewer than two distinct index-of-difficulty values")]
    DegenerateRegression,
    #[error("Gram matrix not positive definite even with jitter {jitter:.1e}")]
    IllConditionedGram { jitter: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse { line: usize, column: usize, message: String },
    #[error("invalid config value {field}: {constraint}")]
    ConfigValidation { field: String, constraint: String },
    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
