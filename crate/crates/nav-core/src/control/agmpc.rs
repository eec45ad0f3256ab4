//! Geometric MPC on SE(2) with input-increment optimization.
//!
//! The tracking error lives in the Lie algebra, `xi = Log(T_ref^-1 T)`, and
//! evolves (linearized about the reference) as `xi' = A_c xi + B_c u~`,
//! where `u~ = u - u_ref` is the input deviation. The controller penalizes
//! input increments `du_k = u~_k - u~_{k-1}` to smooth actuation, which adds
//! the previous deviation to the prediction state.
//!
//! Internally the horizon is condensed into a dense QP over the cumulative
//! deviations `u~_0 .. u~_{Np-1}`; in those variables the actuator limits
//! `0 <= v <= v_max`, `|omega| <= omega_max` are plain boxes.

use super::qp::{qp_solve, QpError, QpProblem};
use super::{
    ControlError, ControlInput, ControlOutcome, ControllerConfig, ControllerState,
    TrackingController,
};
use crate::se2::{tracking_error, Pose2, Twist2};
use crate::trajectory::TrajectorySample;
use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x2, Matrix5, Matrix5x2, Vector3};

const QP_TOL: f64 = 1e-8;
const QP_MAX_ITER: usize = 5000;

/// Euler-discretized error dynamics about one reference input:
/// `A_d = I + A_c dt`, `B_d = B_c dt`.
pub fn error_matrices(u_ref: ControlInput, dt: f64) -> (Matrix3<f64>, Matrix3x2<f64>) {
    let a_c = Matrix3::new(
        0.0, u_ref.omega, 0.0, //
        -u_ref.omega, 0.0, u_ref.v, //
        0.0, 0.0, 0.0,
    );
    let b_c = Matrix3x2::new(
        1.0, 0.0, //
        0.0, 0.0, //
        0.0, 1.0,
    );
    (Matrix3::identity() + a_c * dt, b_c * dt)
}

/// Augmented prediction model over the state `[xi, u~_{k-1}]`:
/// block matrices `[[A_d, B_d], [0, I]]` and `[[B_d], [I]]`.
pub fn build_augmented(a_d: &Matrix3<f64>, b_d: &Matrix3x2<f64>) -> (Matrix5<f64>, Matrix5x2<f64>) {
    let mut a_bar = Matrix5::identity();
    a_bar.fixed_view_mut::<3, 3>(0, 0).copy_from(a_d);
    a_bar.fixed_view_mut::<3, 2>(0, 3).copy_from(b_d);
    let mut b_bar = Matrix5x2::zeros();
    b_bar.fixed_view_mut::<3, 2>(0, 0).copy_from(b_d);
    b_bar.fixed_view_mut::<2, 2>(3, 0).copy_from(&nalgebra::Matrix2::identity());
    (a_bar, b_bar)
}

/// Detailed solver output used by the consistency tests.
pub struct AgmpcSolution {
    pub outcome: ControlOutcome,
    /// Optimal input deviations over the horizon.
    pub u_tildes: Vec<(f64, f64)>,
    /// Errors xi_1..xi_Np predicted by the condensed model.
    pub predicted_errors: Vec<Twist2>,
}

/// SE(2) geometric MPC with input-increment smoothing.
pub struct AGmpc {
    cfg: ControllerConfig,
    state: ControllerState,
}

impl AGmpc {
    pub fn new(cfg: ControllerConfig) -> Self {
        AGmpc {
            cfg,
            state: ControllerState::default(),
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn state(&self) -> ControllerState {
        self.state
    }

    /// Solve one horizon from the current geometric error and the reference
    /// inputs over the horizon, updating the carried input deviation.
    pub fn solve(
        &mut self,
        xi0: Twist2,
        u_refs: &[ControlInput],
    ) -> Result<AgmpcSolution, ControlError> {
        self.cfg.validate()?;
        let np = self.cfg.horizon;
        if u_refs.len() < np {
            return Err(ControlError::WindowTooShort {
                got: u_refs.len(),
                need: np,
            });
        }
        let dt = self.cfg.dt;
        let n = 2 * np;

        let dynamics: Vec<(Matrix3<f64>, Matrix3x2<f64>)> = (0..np)
            .map(|k| error_matrices(u_refs[k], dt))
            .collect();

        // Condense: xi_k = M_k xi_0 + sum_j S[k][j] u~_j.
        let x0 = Vector3::new(xi0.e_x, xi0.e_y, xi0.e_psi);
        let mut m_blocks: Vec<Matrix3<f64>> = Vec::with_capacity(np);
        let mut s = DMatrix::<f64>::zeros(3 * np, n);
        for k in 0..np {
            let (a_k, b_k) = &dynamics[k];
            let prev_m = if k == 0 {
                Matrix3::identity()
            } else {
                m_blocks[k - 1]
            };
            m_blocks.push(a_k * prev_m);
            if k > 0 {
                // S row k = A_k * S row (k-1), then add the fresh input.
                let prev_rows = s.rows(3 * (k - 1), 3).clone_owned();
                let updated = a_k * prev_rows;
                s.rows_mut(3 * k, 3).copy_from(&updated);
            }
            s.view_mut((3 * k, 2 * k), (3, 2)).copy_from(b_k);
        }

        // H = 2 (S' Qbar S + Rbar + D' RDbar D), with D the block
        // differencing matrix mapping u~ to du.
        let q = &self.cfg.q;
        let r = &self.cfg.r;
        let rd = &self.cfg.r_delta;
        let mut w_s = DMatrix::<f64>::zeros(3 * np, n); // Qbar * S
        for k in 0..np {
            let rows = s.rows(3 * k, 3).clone_owned();
            w_s.rows_mut(3 * k, 3).copy_from(&(q * rows));
        }
        let mut h = s.transpose() * w_s;
        for k in 0..np {
            // + R on the diagonal.
            for i in 0..2 {
                for j in 0..2 {
                    h[(2 * k + i, 2 * k + j)] += r[(i, j)];
                }
            }
            // + D' RD D: diagonal gets RD (twice for interior blocks),
            // off-diagonals get -RD.
            let reps = if k + 1 < np { 2.0 } else { 1.0 };
            for i in 0..2 {
                for j in 0..2 {
                    h[(2 * k + i, 2 * k + j)] += reps * rd[(i, j)];
                    if k + 1 < np {
                        h[(2 * k + i, 2 * (k + 1) + j)] -= rd[(i, j)];
                        h[(2 * (k + 1) + i, 2 * k + j)] -= rd[(i, j)];
                    }
                }
            }
        }
        h *= 2.0;
        // Force exact symmetry against accumulation noise.
        let h = (&h + h.transpose()) * 0.5;

        let mut g = DVector::<f64>::zeros(n);
        // 2 S' Qbar M xi0.
        let mut qm = DVector::<f64>::zeros(3 * np);
        for k in 0..np {
            let v = q * (m_blocks[k] * x0);
            qm.rows_mut(3 * k, 3).copy_from(&v);
        }
        g += 2.0 * s.transpose() * qm;
        // The k=0 increment couples to the carried deviation.
        let prev = nalgebra::Vector2::new(self.state.u_tilde_prev.0, self.state.u_tilde_prev.1);
        let coupling = rd * prev * 2.0;
        g[0] -= coupling[0];
        g[1] -= coupling[1];

        let mut lower = DVector::<f64>::zeros(n);
        let mut upper = DVector::<f64>::zeros(n);
        for k in 0..np {
            lower[2 * k] = -u_refs[k].v;
            upper[2 * k] = self.cfg.v_max - u_refs[k].v;
            lower[2 * k + 1] = -self.cfg.omega_max - u_refs[k].omega;
            upper[2 * k + 1] = self.cfg.omega_max - u_refs[k].omega;
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

        let u_tildes: Vec<(f64, f64)> = (0..np).map(|k| (sol.z[2 * k], sol.z[2 * k + 1])).collect();

        // Predicted errors from the condensed model.
        let pred = &s * &sol.z;
        let predicted_errors: Vec<Twist2> = (0..np)
            .map(|k| {
                let mx = m_blocks[k] * x0;
                Twist2::new(
                    mx[0] + pred[3 * k],
                    mx[1] + pred[3 * k + 1],
                    mx[2] + pred[3 * k + 2],
                )
            })
            .collect();

        // Full objective by rollout, constants included.
        let mut cost = (x0.transpose() * q * x0)[(0, 0)];
        let mut xi = x0;
        let mut prev_u = prev;
        for k in 0..np {
            let u_t = nalgebra::Vector2::new(u_tildes[k].0, u_tildes[k].1);
            let du = u_t - prev_u;
            cost += (u_t.transpose() * r * u_t)[(0, 0)];
            cost += (du.transpose() * rd * du)[(0, 0)];
            let (a_k, b_k) = &dynamics[k];
            xi = a_k * xi + b_k * u_t;
            cost += (xi.transpose() * q * xi)[(0, 0)];
            prev_u = u_t;
        }

        let u0 = ControlInput::new(
            u_refs[0].v + u_tildes[0].0,
            u_refs[0].omega + u_tildes[0].1,
        );
        self.state.u_tilde_prev = u_tildes[0];

        Ok(AgmpcSolution {
            outcome: ControlOutcome {
                u: u0,
                predicted_cost: cost,
            },
            u_tildes,
            predicted_errors,
        })
    }
}

impl TrackingController for AGmpc {
    fn name(&self) -> &'static str {
        "agmpc"
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    fn reset(&mut self) {
        self.state = ControllerState::default();
    }

    fn compute(
        &mut self,
        pose: &Pose2,
        window: &[TrajectorySample],
    ) -> Result<ControlOutcome, ControlError> {
        if window.len() < self.cfg.horizon {
            return Err(ControlError::WindowTooShort {
                got: window.len(),
                need: self.cfg.horizon,
            });
        }
        let xi0 = tracking_error(&window[0].pose, pose);
        let u_refs: Vec<ControlInput> = window
            .iter()
            .take(self.cfg.horizon)
            .map(|s| ControlInput::new(s.v_ref, s.omega_ref))
            .collect();
        Ok(self.solve(xi0, &u_refs)?.outcome)
    }
}
