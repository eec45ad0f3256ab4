//! Core library for a planar (SE(2)) autonomous navigation stack.
//!
//! The crate is organized around the stages of a navigation pipeline:
//!
//! - [`se2`]: exact SE(2) group operations, exp/log maps, and the geometric
//!   tracking error consumed by the controllers.
//! - [`grid`]: occupancy grids, obstacle inflation, point-cloud projection,
//!   line-of-sight queries, and map file I/O.
//! - [`planner`]: grid planners (baseline and turning-aware A*) behind the
//!   [`planner::PathPlanner`] trait, path post-processing, and reference
//!   trajectory generation.
//! - [`avoidance`]: conflict detection against moving obstacles and cubic
//!   Bezier detours spliced into the active reference trajectory.
//! - [`control`]: tracking controllers behind the
//!   [`control::TrackingController`] trait (geometric input-increment MPC and
//!   a Euclidean error-state baseline), a box-constrained QP solver, and the
//!   Ackermann steering conversion.
//! - [`estimation`]: a 5-state EKF fusing scan odometry with wheel/IMU data,
//!   2D scan-to-map ICP, and the map-frame correction filter.
//!
//! Planner and controller variants are registered by name; see
//! [`planner::PlannerRegistry`] and [`control::ControllerRegistry`].

pub mod avoidance;
pub mod control;
pub mod estimation;
pub mod grid;
pub mod planner;
pub mod se2;
pub mod trajectory;

pub use se2::{Pose2, Twist2};
