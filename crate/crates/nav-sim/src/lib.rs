//! Deterministic desk-scale simulator and experiment harness for the planar
//! navigation stack: a lagged kinematic-bicycle plant, scheduled sensor
//! synthesis, closed-loop tracking with EKF feedback and scan-to-map
//! corrections, planning benchmarks, end-to-end navigation runs, and report
//! emission. Driven by the `nav-sim` CLI.

pub mod experiments;
pub mod fixtures;
pub mod plant;
pub mod reference;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod sensors;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown controller `{0}`")]
    UnknownController(String),
    #[error(transparent)]
    Reference(#[from] reference::ReferenceError),
    #[error(transparent)]
    Grid(#[from] nav_core::grid::GridError),
    #[error(transparent)]
    Plan(#[from] nav_core::planner::PlanError),
    #[error(transparent)]
    Control(#[from] nav_core::control::ControlError),
    #[error(transparent)]
    Avoidance(#[from] nav_core::avoidance::AvoidanceError),
    #[error(transparent)]
    Estimation(#[from] nav_core::estimation::EstimationError),
    #[error("report error: {0}")]
    Report(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// CLI exit code category: 2 invalid input, 3 infeasible, 4 solver
    /// failure.
    pub fn exit_code(&self) -> i32 {
        use nav_core::avoidance::AvoidanceError;
        use nav_core::control::ControlError;
        use nav_core::planner::PlanError;
        match self {
            SimError::Plan(PlanError::Unreachable { .. }) => 3,
            SimError::Avoidance(
                AvoidanceError::Infeasible { .. } | AvoidanceError::BlockedDetour { .. },
            ) => 3,
            SimError::Control(ControlError::SolverFailure { .. }) => 4,
            _ => 2,
        }
    }
}
