//! Trajectory tracking controllers.
//!
//! Two interchangeable controllers implement [`TrackingController`] and are
//! selected by name through the [`ControllerRegistry`]:
//!
//! - `"agmpc"` ([`AGmpc`]): tracking error on the SE(2) manifold, optimized
//!   over input increments with an augmented prediction model.
//! - `"mpc"` ([`BaselineMpc`]): Euclidean error state linearized about the
//!   reference with the kinematic bicycle model.
//!
//! Both condense their horizon into a dense box-constrained QP solved by
//! [`qp::qp_solve`].

mod agmpc;
mod baseline;
pub mod qp;

pub use agmpc::{build_augmented, error_matrices, AGmpc};
pub use baseline::BaselineMpc;

use crate::se2::Pose2;
use crate::trajectory::TrajectorySample;
use nalgebra::{Matrix2, Matrix3};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("controller config error: {0}")]
    Config(String),
    #[error("reference window too short: got {got}, need {need}")]
    WindowTooShort { got: usize, need: usize },
    #[error("QP did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverFailure { residual: f64, iterations: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Velocity/yaw-rate command.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlInput {
    pub v: f64,
    pub omega: f64,
}

impl ControlInput {
    pub fn new(v: f64, omega: f64) -> Self {
        ControlInput { v, omega }
    }

    pub fn zero() -> Self {
        ControlInput::new(0.0, 0.0)
    }
}

/// Ackermann interface command: forward speed and front steering angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AckermannCommand {
    pub v: f64,
    pub delta: f64,
}

/// Convert a (v, omega) command to the Ackermann steering interface:
/// `delta = arctan(omega * L / max(v, v_eps))`, clamped to the steering
/// limit. The `v_eps` guard removes the singularity at standstill.
pub fn to_ackermann(u: ControlInput, wheelbase: f64, v_eps: f64, delta_max: f64) -> AckermannCommand {
    let delta = (u.omega * wheelbase / u.v.max(v_eps)).atan();
    AckermannCommand {
        v: u.v,
        delta: delta.clamp(-delta_max, delta_max),
    }
}

/// Horizon, weights, bounds, and vehicle geometry shared by both
/// controllers.
#[derive(Clone, Debug)]
pub struct ControllerConfig {
    pub horizon: usize,
    pub dt: f64,
    pub q: Matrix3<f64>,
    pub r: Matrix2<f64>,
    pub r_delta: Matrix2<f64>,
    pub v_max: f64,
    pub omega_max: f64,
    pub delta_max: f64,
    pub wheelbase: f64,
    pub v_eps: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            horizon: 20,
            dt: 1.0 / 30.0,
            q: Matrix3::from_diagonal(&nalgebra::Vector3::new(10.0, 10.0, 4.0)),
            r: Matrix2::from_diagonal(&nalgebra::Vector2::new(1.0, 1.0)),
            r_delta: Matrix2::from_diagonal(&nalgebra::Vector2::new(5.0, 5.0)),
            v_max: 2.0,
            omega_max: 1.5,
            delta_max: 0.7,
            wheelbase: 0.65,
            v_eps: 0.05,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.horizon == 0 {
            return Err(ControlError::Config("horizon must be at least 1".into()));
        }
        if self.dt <= 0.0 {
            return Err(ControlError::Config("dt must be positive".into()));
        }
        for (name, val) in [
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("delta_max", self.delta_max),
            ("wheelbase", self.wheelbase),
        ] {
            if val <= 0.0 || !val.is_finite() {
                return Err(ControlError::Config(format!(
                    "{name} must be positive, got {val}"
                )));
            }
        }
        check_psd3("q", &self.q)?;
        check_psd2("r", &self.r)?;
        check_psd2("r_delta", &self.r_delta)?;
        Ok(())
    }

    /// Parse the flat `key = value` config format. Missing keys keep their
    /// defaults; unknown keys are rejected.
    pub fn from_key_values(text: &str) -> Result<Self, ControlError> {
        let mut cfg = ControllerConfig::default();
        let mut qd = (10.0, 10.0, 4.0);
        let mut rd = (1.0, 1.0);
        let mut rdd = (5.0, 5.0);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ControlError::Config(format!("line {}: expected `key = value`", n + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let fval = || -> Result<f64, ControlError> {
                value.parse().map_err(|_| {
                    ControlError::Config(format!("line {}: bad number `{value}`", n + 1))
                })
            };
            match key {
                "horizon" => {
                    cfg.horizon = value.parse().map_err(|_| {
                        ControlError::Config(format!("line {}: bad horizon `{value}`", n + 1))
                    })?
                }
                "dt" => cfg.dt = fval()?,
                "q_x" => qd.0 = fval()?,
                "q_y" => qd.1 = fval()?,
                "q_psi" => qd.2 = fval()?,
                "r_v" => rd.0 = fval()?,
                "r_w" => rd.1 = fval()?,
                "rd_v" => rdd.0 = fval()?,
                "rd_w" => rdd.1 = fval()?,
                "v_max" => cfg.v_max = fval()?,
                "omega_max" => cfg.omega_max = fval()?,
                "delta_max" => cfg.delta_max = fval()?,
                "wheelbase" => cfg.wheelbase = fval()?,
                "v_eps" => cfg.v_eps = fval()?,
                other => {
                    return Err(ControlError::Config(format!(
                        "line {}: unknown key `{other}`",
                        n + 1
                    )))
                }
            }
        }
        cfg.q = Matrix3::from_diagonal(&nalgebra::Vector3::new(qd.0, qd.1, qd.2));
        cfg.r = Matrix2::from_diagonal(&nalgebra::Vector2::new(rd.0, rd.1));
        cfg.r_delta = Matrix2::from_diagonal(&nalgebra::Vector2::new(rdd.0, rdd.1));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self, ControlError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ControlError::Config(format!("cannot read config: {e}")))?;
        Self::from_key_values(&text)
    }
}

fn check_psd3(name: &str, m: &Matrix3<f64>) -> Result<(), ControlError> {
    if (m - m.transpose()).abs().max() > 1e-12 {
        return Err(ControlError::Config(format!("{name} must be symmetric")));
    }
    let eig = m.symmetric_eigenvalues();
    if eig.min() < -1e-12 {
        return Err(ControlError::Config(format!(
            "{name} must be positive semidefinite"
        )));
    }
    Ok(())
}

fn check_psd2(name: &str, m: &Matrix2<f64>) -> Result<(), ControlError> {
    if (m - m.transpose()).abs().max() > 1e-12 {
        return Err(ControlError::Config(format!("{name} must be symmetric")));
    }
    let eig = m.symmetric_eigenvalues();
    if eig.min() < -1e-12 {
        return Err(ControlError::Config(format!(
            "{name} must be positive semidefinite"
        )));
    }
    Ok(())
}

/// Persistent controller state: the previous input deviation, reset to zero
/// when a new trajectory is loaded and carried across detour splices.
#[derive(Clone, Copy, Debug, Default)]
pub struct ControllerState {
    pub u_tilde_prev: (f64, f64),
}

/// Result of one control step.
#[derive(Clone, Copy, Debug)]
pub struct ControlOutcome {
    pub u: ControlInput,
    /// Full predicted objective value of the solved horizon, including the
    /// constant terms, so it is directly comparable to brute-force search.
    pub predicted_cost: f64,
}

/// A tracking control law selectable at runtime.
///
/// `window` must hold at least `horizon()` samples starting at the current
/// reference index; `window[0]` defines the tracking error.
pub trait TrackingController: Send {
    fn name(&self) -> &'static str;
    fn horizon(&self) -> usize;
    /// Clear persistent state when a new trajectory is loaded.
    fn reset(&mut self);
    fn compute(
        &mut self,
        pose: &Pose2,
        window: &[TrajectorySample],
    ) -> Result<ControlOutcome, ControlError>;
}

type ControllerFactory = Box<dyn Fn(ControllerConfig) -> Box<dyn TrackingController> + Send + Sync>;

/// Name-keyed registry of controller factories.
pub struct ControllerRegistry {
    factories: BTreeMap<&'static str, ControllerFactory>,
}

impl ControllerRegistry {
    pub fn new() -> Self {
        ControllerRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Both built-in controllers registered under their names.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register("agmpc", Box::new(|cfg| Box::new(AGmpc::new(cfg))));
        r.register("mpc", Box::new(|cfg| Box::new(BaselineMpc::new(cfg))));
        r
    }

    pub fn register(&mut self, name: &'static str, factory: ControllerFactory) {
        self.factories.insert(name, factory);
    }

    pub fn create(
        &self,
        name: &str,
        cfg: ControllerConfig,
    ) -> Option<Box<dyn TrackingController>> {
        self.factories.get(name).map(|f| f(cfg))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ackermann_conversion() {
        let cmd = to_ackermann(ControlInput::new(1.0, 0.0), 1.0, 0.05, 0.7);
        assert_eq!(cmd.delta, 0.0);
        assert_eq!(cmd.v, 1.0);

        let cmd = to_ackermann(ControlInput::new(1.0, 1.0), 1.0, 0.05, 1.0);
        assert!((cmd.delta - std::f64::consts::FRAC_PI_4).abs() < 1e-12);

        // Standstill guard: arctan(0.5 * 0.5 / 0.05) clamped to delta_max.
        let cmd = to_ackermann(ControlInput::new(0.0, 0.5), 0.5, 0.05, 0.7);
        let unclamped = (0.5_f64 * 0.5 / 0.05).atan();
        assert!(unclamped > 0.7);
        assert_eq!(cmd.delta, 0.7);
    }

    #[test]
    fn config_parse_round_trip() {
        let text = "\
horizon = 12
dt = 0.05
q_x = 8
q_y = 9
q_psi = 3
r_v = 0.5
r_w = 0.6
rd_v = 2
rd_w = 3
v_max = 1.5
omega_max = 1.2
delta_max = 0.6
wheelbase = 0.5
v_eps = 0.02
";
        let cfg = ControllerConfig::from_key_values(text).unwrap();
        assert_eq!(cfg.horizon, 12);
        assert_eq!(cfg.dt, 0.05);
        assert_eq!(cfg.q[(0, 0)], 8.0);
        assert_eq!(cfg.q[(1, 1)], 9.0);
        assert_eq!(cfg.q[(2, 2)], 3.0);
        assert_eq!(cfg.r[(1, 1)], 0.6);
        assert_eq!(cfg.r_delta[(0, 0)], 2.0);
        assert_eq!(cfg.wheelbase, 0.5);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(ControllerConfig::from_key_values("bogus = 1\n").is_err());
        assert!(ControllerConfig::from_key_values("v_max = fast\n").is_err());
        assert!(ControllerConfig::from_key_values("v_max = -1\n").is_err());
        // Partial configs keep defaults.
        let cfg = ControllerConfig::from_key_values("horizon = 5\n").unwrap();
        assert_eq!(cfg.horizon, 5);
        assert_eq!(cfg.v_max, ControllerConfig::default().v_max);
    }

    #[test]
    fn registry_resolves_both_controllers() {
        let reg = ControllerRegistry::with_defaults();
        assert_eq!(reg.names(), vec!["agmpc", "mpc"]);
        let mut c = reg.create("agmpc", ControllerConfig::default()).unwrap();
        assert_eq!(c.name(), "agmpc");
        c.reset();
        let c = reg.create("mpc", ControllerConfig::default()).unwrap();
        assert_eq!(c.name(), "mpc");
        assert!(reg.create("pid", ControllerConfig::default()).is_none());
    }
}
