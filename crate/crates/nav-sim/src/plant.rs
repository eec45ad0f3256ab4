//! Ground-truth vehicle plant: kinematic bicycle with first-order actuator
//! lag, integrated with RK4.

use nav_core::control::AckermannCommand;
use nav_core::se2::Pose2;

/// Vehicle geometry and actuator dynamics of the simulated plant.
#[derive(Clone, Copy, Debug)]
pub struct PlantParams {
    pub wheelbase: f64,
    /// First-order speed lag time constant; zero means instantaneous.
    pub tau_v: f64,
    /// First-order steering lag time constant; zero means instantaneous.
    pub tau_delta: f64,
    pub delta_max: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            wheelbase: 0.65,
            tau_v: 0.2,
            tau_delta: 0.1,
            delta_max: 0.7,
        }
    }
}

/// Ground-truth state: pose in the map frame plus actuator states.
#[derive(Clone, Copy, Debug)]
pub struct BicycleState {
    pub pose: Pose2,
    pub v_actual: f64,
    pub delta_actual: f64,
}

impl BicycleState {
    pub fn at_rest(pose: Pose2) -> Self {
        BicycleState {
            pose,
            v_actual: 0.0,
            delta_actual: 0.0,
        }
    }

    /// Yaw rate implied by the current actuator state.
    pub fn omega(&self, wheelbase: f64) -> f64 {
        self.v_actual * self.delta_actual.tan() / wheelbase
    }
}

fn lag(current: f64, command: f64, dt: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        command
    } else {
        current + (command - current) * (dt / tau).min(1.0)
    }
}

/// Advance the plant by `dt`: actuator lag first, then RK4 integration of
/// the bicycle kinematics under the updated (held constant) actuators.
pub fn step_bicycle(
    s: &BicycleState,
    cmd: &AckermannCommand,
    dt: f64,
    params: &PlantParams,
) -> BicycleState {
    let v = lag(s.v_actual, cmd.v, dt, params.tau_v);
    let delta = lag(s.delta_actual, cmd.delta, dt, params.tau_delta)
        .clamp(-params.delta_max, params.delta_max);
    let omega = v * delta.tan() / params.wheelbase;

    let f = |theta: f64| (v * theta.cos(), v * theta.sin(), omega);
    let theta0 = s.pose.theta();
    let k1 = f(theta0);
    let k2 = f(theta0 + 0.5 * dt * k1.2);
    let k3 = f(theta0 + 0.5 * dt * k2.2);
    let k4 = f(theta0 + dt * k3.2);
    let pose = Pose2::new(
        s.pose.x + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        s.pose.y + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        theta0 + dt / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
    );
    BicycleState {
        pose,
        v_actual: v,
        delta_actual: delta,
    }
}
