//! Baseline MPC: Euclidean error state linearized about the reference.
//!
//! The error `e = [x - x_ref, y - y_ref, theta - theta_ref]` lives in world
//! coordinates (heading difference wrapped). The plant is the kinematic
//! bicycle; with the Ackermann relation `omega = v tan(delta) / L` the
//! planar kinematics reduce to `x' = v cos(theta), y' = v sin(theta),
//! theta' = omega`, so the controller shares the (v, omega) input space,
//! weights, and actuator boxes with the geometric controller and its output
//! is converted to a steering angle the same way. Linearization is frozen
//! at the current reference sample (the classical error-state formulation);
//! there is no input-increment term.

use super::qp::{qp_solve, QpError, QpProblem};
use super::{ControlError, ControlInput, ControlOutcome, ControllerConfig, TrackingController};
use crate::se2::{normalize_angle, Pose2};
use crate::trajectory::TrajectorySample;
use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x2, Vector3};

const QP_TOL: f64 = 1e-8;
const QP_MAX_ITER: usize = 5000;

/// Linearized Euclidean error-state MPC.
pub struct BaselineMpc {
    cfg: ControllerConfig,
}

impl BaselineMpc {
    pub fn new(cfg: ControllerConfig) -> Self {
        BaselineMpc { cfg }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    /// World-frame error dynamics about one reference sample, Euler
    /// discretized: state (x, y, theta) error, inputs (v, omega) deviations.
    fn linearized(&self, sample: &TrajectorySample) -> (Matrix3<f64>, Matrix3x2<f64>) {
        let dt = self.cfg.dt;
        let theta = sample.pose.theta();
        let v = sample.v_ref;
        let a = Matrix3::new(
            1.0, 0.0, -v * theta.sin() * dt, //
            0.0, 1.0, v * theta.cos() * dt, //
            0.0, 0.0, 1.0,
        );
        let b = Matrix3x2::new(
            theta.cos() * dt, 0.0, //
            theta.sin() * dt, 0.0, //
            0.0, dt,
        );
        (a, b)
    }

    pub fn solve(
        &self,
        pose: &Pose2,
        window: &[TrajectorySample],
    ) -> Result<ControlOutcome, ControlError> {
        self.cfg.validate()?;
        let np = self.cfg.horizon;
        if window.len() < np {
            return Err(ControlError::WindowTooShort {
                got: window.len(),
                need: np,
            });
        }
        let q = &self.cfg.q;
        let r = &self.cfg.r;
        let n = 2 * np;

        let reference = &window[0];
        let e0 = Vector3::new(
            pose.x - reference.pose.x,
            pose.y - reference.pose.y,
            normalize_angle(pose.theta() - reference.pose.theta()),
        );

        // Classical frozen-point linearization: one (A, B) about the
        // current reference sample, held over the horizon.
        let (a_d, b_d) = self.linearized(reference);

        let mut m_blocks: Vec<Matrix3<f64>> = Vec::with_capacity(np);
        let mut s = DMatrix::<f64>::zeros(3 * np, n);
        for k in 0..np {
            let prev_m = if k == 0 {
                Matrix3::identity()
            } else {
                m_blocks[k - 1]
            };
            m_blocks.push(a_d * prev_m);
            if k > 0 {
                let prev_rows = s.rows(3 * (k - 1), 3).clone_owned();
                let updated = a_d * prev_rows;
                s.rows_mut(3 * k, 3).copy_from(&updated);
            }
            s.view_mut((3 * k, 2 * k), (3, 2)).copy_from(&b_d);
        }

        let mut w_s = DMatrix::<f64>::zeros(3 * np, n);
        for k in 0..np {
            let rows = s.rows(3 * k, 3).clone_owned();
            w_s.rows_mut(3 * k, 3).copy_from(&(q * rows));
        }
        let mut h = s.transpose() * w_s;
        for k in 0..np {
            for i in 0..2 {
                for j in 0..2 {
                    h[(2 * k + i, 2 * k + j)] += r[(i, j)];
                }
            }
        }
        h *= 2.0;
        let h = (&h + h.transpose()) * 0.5;

        let mut qm = DVector::<f64>::zeros(3 * np);
        for k in 0..np {
            let v = q * (m_blocks[k] * e0);
            qm.rows_mut(3 * k, 3).copy_from(&v);
        }
        let g = 2.0 * s.transpose() * qm;

        // Same actuator boxes as the geometric controller, about the frozen
        // reference input.
        let mut lower = DVector::<f64>::zeros(n);
        let mut upper = DVector::<f64>::zeros(n);
        for k in 0..np {
            lower[2 * k] = -reference.v_ref;
            upper[2 * k] = self.cfg.v_max - reference.v_ref;
            lower[2 * k + 1] = -self.cfg.omega_max - reference.omega_ref;
            upper[2 * k + 1] = self.cfg.omega_max - reference.omega_ref;
        }

        let problem = QpProblem {
            hessian: h,
            gradient: g,
            lower,
            upper,
        };
        let sol = qp_solve(&problem, QP_TOL, QP_MAX_ITER).map_err(|e| match e {
            QpError::NonConvergence {
                residual,
                iterations,
            } => ControlError::SolverFailure {
                residual,
                iterations,
            },
            QpError::InvalidProblem(msg) => ControlError::Config(msg),
        })?;

        // Full objective including the constant e0 term.
        let mut cost = (e0.transpose() * q * e0)[(0, 0)];
        let mut e = e0;
        for k in 0..np {
            let u_t = nalgebra::Vector2::new(sol.z[2 * k], sol.z[2 * k + 1]);
            cost += (u_t.transpose() * r * u_t)[(0, 0)];
            e = a_d * e + b_d * u_t;
            cost += (e.transpose() * q * e)[(0, 0)];
        }

        Ok(ControlOutcome {
            u: ControlInput::new(
                reference.v_ref + sol.z[0],
                reference.omega_ref + sol.z[1],
            ),
            predicted_cost: cost,
        })
    }
}

impl TrackingController for BaselineMpc {
    fn name(&self) -> &'static str {
        "mpc"
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    fn reset(&mut self) {}

    fn compute(
        &mut self,
        pose: &Pose2,
        window: &[TrajectorySample],
    ) -> Result<ControlOutcome, ControlError> {
        self.solve(pose, window)
    }
}
