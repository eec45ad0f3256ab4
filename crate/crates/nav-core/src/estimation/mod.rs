//! Dual-layer state estimation.
//!
//! A 5-state EKF (x, y, theta, v, omega) in the local odom frame fuses
//! low-rate scan odometry with high-rate wheel and IMU measurements, giving
//! the controller smooth feedback above the LiDAR rate. A second, map-level
//! layer corrects the odom frame against the global map: [`icp_scan_to_map`]
//! registers scans to the occupancy map, [`correction_filter`] low-passes
//! the resulting odom-to-map transform, and [`compose_map_pose`] produces
//! the map-frame pose consumed by planner and controller.

mod icp;

pub use icp::{icp_scan_to_map, IcpConfig, IcpIteration, IcpMatch, LaserScan2};

use crate::se2::{exp_se2, log_se2, normalize_angle, Pose2};
use nalgebra::{Matrix2, Matrix3, Matrix5, SMatrix, SVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("stale measurement: stamp {measurement:.6} precedes state {state:.6}")]
    StaleMeasurement { state: f64, measurement: f64 },
    #[error("invalid noise covariance: {0}")]
    InvalidNoise(String),
    #[error("degenerate match: {0}")]
    DegenerateMatch(String),
    #[error("singular innovation covariance")]
    SingularInnovation,
}

/// Fused robot state in the local odom frame with covariance over
/// (x, y, theta, v, omega).
#[derive(Clone, Debug)]
pub struct EkfState {
    pub pose: Pose2,
    pub v: f64,
    pub omega: f64,
    pub covariance: Matrix5<f64>,
    pub stamp: f64,
}

impl EkfState {
    pub fn new(pose: Pose2, covariance: Matrix5<f64>, stamp: f64) -> Self {
        EkfState {
            pose,
            v: 0.0,
            omega: 0.0,
            covariance,
            stamp,
        }
    }

    /// Symmetric PSD check used by tests and debug assertions: Cholesky of
    /// the symmetrized covariance (plus a tiny jitter) must succeed.
    pub fn covariance_is_psd(&self) -> bool {
        let sym = (self.covariance + self.covariance.transpose()) * 0.5;
        let asym = (self.covariance - self.covariance.transpose()).abs().max();
        if asym > 1e-10 {
            return false;
        }
        (sym + Matrix5::identity() * 1e-12).cholesky().is_some()
    }
}

/// A timestamped sensor reading with its noise covariance.
#[derive(Clone, Debug)]
pub enum MeasurementKind {
    /// Scan-based odometry pose in the local frame.
    ScanOdom { pose: Pose2, noise: Matrix3<f64> },
    /// Wheel encoder speed and yaw rate.
    WheelOdom { v: f64, omega: f64, noise: Matrix2<f64> },
    /// IMU yaw rate (variance, 1x1 covariance).
    ImuYaw { omega: f64, noise: f64 },
}

#[derive(Clone, Debug)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub stamp: f64,
}

/// Unicycle prediction: positions advance along the heading, v and omega
/// are held, covariance propagates through the motion Jacobian plus
/// `q_process * dt`.
pub fn ekf_predict(s: &EkfState, dt: f64, q_process: &Matrix5<f64>) -> EkfState {
    let theta = s.pose.theta();
    let (sin_t, cos_t) = theta.sin_cos();
    let pose = Pose2::new(
        s.pose.x + s.v * cos_t * dt,
        s.pose.y + s.v * sin_t * dt,
        theta + s.omega * dt,
    );
    let mut f = Matrix5::identity();
    f[(0, 2)] = -s.v * sin_t * dt;
    f[(0, 3)] = cos_t * dt;
    f[(1, 2)] = s.v * cos_t * dt;
    f[(1, 3)] = sin_t * dt;
    f[(2, 4)] = dt;
    let cov = f * s.covariance * f.transpose() + q_process * dt;
    EkfState {
        pose,
        v: s.v,
        omega: s.omega,
        covariance: (cov + cov.transpose()) * 0.5,
        stamp: s.stamp + dt,
    }
}

fn check_noise_psd<const D: usize>(noise: &SMatrix<f64, D, D>) -> Result<(), EstimationError> {
    if (noise - noise.transpose()).abs().max() > 1e-9 {
        return Err(EstimationError::InvalidNoise("asymmetric".into()));
    }
    let dynamic = nalgebra::DMatrix::from_iterator(D, D, noise.iter().copied());
    if dynamic.symmetric_eigenvalues().min() < -1e-12 {
        return Err(EstimationError::InvalidNoise("negative eigenvalue".into()));
    }
    Ok(())
}

/// One EKF update in Joseph form. `D` is the measurement dimension; `rows`
/// lists the observed state components; `wrap` marks angular innovations.
fn joseph_update<const D: usize>(
    s: &EkfState,
    rows: [usize; D],
    z: SVector<f64, D>,
    noise: SMatrix<f64, D, D>,
    wrap: [bool; D],
    stamp: f64,
) -> Result<EkfState, EstimationError> {
    check_noise_psd(&noise)?;
    let state = SVector::<f64, 5>::from_column_slice(&[
        s.pose.x,
        s.pose.y,
        s.pose.theta(),
        s.v,
        s.omega,
    ]);

    let mut h = SMatrix::<f64, D, 5>::zeros();
    for (i, &row) in rows.iter().enumerate() {
        h[(i, row)] = 1.0;
    }
    let mut innovation = z - h * state;
    for i in 0..D {
        if wrap[i] {
            innovation[i] = normalize_angle(innovation[i]);
        }
    }

    let s_mat = h * s.covariance * h.transpose() + noise;
    let s_inv = s_mat
        .try_inverse()
        .ok_or(EstimationError::SingularInnovation)?;
    let k = s.covariance * h.transpose() * s_inv;

    let updated = state + k * innovation;
    let i_kh = Matrix5::identity() - k * h;
    let cov = i_kh * s.covariance * i_kh.transpose() + k * noise * k.transpose();

    Ok(EkfState {
        pose: Pose2::new(updated[0], updated[1], updated[2]),
        v: updated[3],
        omega: updated[4],
        covariance: (cov + cov.transpose()) * 0.5,
        stamp,
    })
}

/// Standard EKF update. Out-of-order measurements are rejected with a
/// [`EstimationError::StaleMeasurement`] signal; the caller keeps the prior.
pub fn ekf_update(s: &EkfState, m: &Measurement) -> Result<EkfState, EstimationError> {
    if m.stamp + 1e-12 < s.stamp {
        return Err(EstimationError::StaleMeasurement {
            state: s.stamp,
            measurement: m.stamp,
        });
    }
    match &m.kind {
        MeasurementKind::ScanOdom { pose, noise } => joseph_update(
            s,
            [0, 1, 2],
            SVector::<f64, 3>::new(pose.x, pose.y, pose.theta()),
            *noise,
            [false, false, true],
            m.stamp,
        ),
        MeasurementKind::WheelOdom { v, omega, noise } => joseph_update(
            s,
            [3, 4],
            SVector::<f64, 2>::new(*v, *omega),
            *noise,
            [false, false],
            m.stamp,
        ),
        MeasurementKind::ImuYaw { omega, noise } => joseph_update(
            s,
            [4],
            SVector::<f64, 1>::new(*omega),
            SMatrix::<f64, 1, 1>::new(*noise),
            [false],
            m.stamp,
        ),
    }
}

/// The odom-to-map transform estimated by the map-level layer, with the ICP
/// fitness (mean point-to-target distance) that produced it.
#[derive(Clone, Copy, Debug)]
pub struct MapCorrection {
    pub t_ml: Pose2,
    pub stamp: f64,
    pub fitness: f64,
}

impl MapCorrection {
    pub fn identity() -> Self {
        MapCorrection {
            t_ml: Pose2::identity(),
            stamp: 0.0,
            fitness: 0.0,
        }
    }

    /// Turn a raw scan-to-map match (body pose in the map frame) into an
    /// odom-to-map correction using the local pose at the scan time.
    pub fn from_match(m: &IcpMatch, local: &EkfState) -> Self {
        MapCorrection {
            t_ml: m.pose.compose(&local.pose.inverse()),
            stamp: local.stamp,
            fitness: m.fitness,
        }
    }
}

/// Map-frame robot pose: the odom-to-map transform composed with the local
/// pose.
pub fn compose_map_pose(corr: &MapCorrection, local: &EkfState) -> Pose2 {
    corr.t_ml.compose(&local.pose)
}

/// Geodesic low-pass on the odom-to-map transform. Corrections whose
/// fitness exceeds the gate are rejected outright; otherwise the previous
/// transform moves a fraction `alpha` of the way to the new one along the
/// SE(2) geodesic.
pub fn correction_filter(
    prev: &MapCorrection,
    new_raw: &MapCorrection,
    alpha: f64,
    fitness_gate: f64,
) -> MapCorrection {
    debug_assert!(alpha > 0.0 && alpha <= 1.0);
    if new_raw.fitness > fitness_gate {
        return *prev;
    }
    let delta = log_se2(&prev.t_ml.inverse().compose(&new_raw.t_ml));
    let t_ml = prev.t_ml.compose(&exp_se2(&delta.scale(alpha)));
    MapCorrection {
        t_ml,
        stamp: new_raw.stamp,
        fitness: new_raw.fitness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh_state() -> EkfState {
        EkfState::new(Pose2::identity(), Matrix5::identity() * 0.1, 0.0)
    }

    fn small_q() -> Matrix5<f64> {
        Matrix5::identity() * 1e-3
    }

    #[test]
    fn predict_straight_line() {
        let mut s = fresh_state();
        s.v = 1.0;
        let out = ekf_predict(&s, 1.0, &small_q());
        assert!((out.pose.x - 1.0).abs() < 1e-12);
        assert!(out.pose.y.abs() < 1e-12);
        assert!(out.pose.theta().abs() < 1e-12);
        assert_eq!(out.stamp, 1.0);
    }

    #[test]
    fn predict_at_rest_grows_covariance() {
        let s = fresh_state();
        let out = ekf_predict(&s, 0.5, &small_q());
        assert_eq!(out.pose, s.pose);
        // Diagonals gain at least q * dt; position also inherits velocity
        // uncertainty through the motion Jacobian.
        for i in 0..5 {
            assert!(out.covariance[(i, i)] >= 0.1 + 5e-4 - 1e-15);
        }
        assert!(out.covariance_is_psd());
    }

    #[test]
    fn predict_arc_against_closed_form() {
        // Exact arc: x = (v/w) sin(wt), y = (v/w)(1 - cos(wt)).
        let (v, w) = (1.0, std::f64::consts::FRAC_PI_2);
        let mut s = fresh_state();
        s.v = v;
        s.omega = w;
        let dt = 0.5;
        let mut worst: f64 = 0.0;
        for step in 1..=4 {
            s = ekf_predict(&s, dt, &small_q());
            let t = step as f64 * dt;
            let exact_x = v / w * (w * t).sin();
            let exact_y = v / w * (1.0 - (w * t).cos());
            let err = (s.pose.x - exact_x).hypot(s.pose.y - exact_y);
            worst = worst.max(err);
        }
        // Euler integration of the unicycle: per-step error bound v*dt^2*|w|.
        assert!(worst <= 4.0 * v * dt * dt * w);
    }

    #[test]
    fn update_with_zero_noise_snaps_to_measurement() {
        let s = fresh_state();
        let m = Measurement {
            kind: MeasurementKind::ScanOdom {
                pose: Pose2::new(0.3, -0.2, 0.1),
                noise: Matrix3::zeros(),
            },
            stamp: 0.0,
        };
        let out = ekf_update(&s, &m).unwrap();
        assert!((out.pose.x - 0.3).abs() < 1e-12);
        assert!((out.pose.y + 0.2).abs() < 1e-12);
        assert!((out.pose.theta() - 0.1).abs() < 1e-12);
        assert!(out.covariance_is_psd());
    }

    #[test]
    fn update_with_huge_noise_is_ignored() {
        let mut s = fresh_state();
        s.v = 0.7;
        let m = Measurement {
            kind: MeasurementKind::WheelOdom {
                v: 5.0,
                omega: -3.0,
                noise: Matrix2::identity() * 1e12,
            },
            stamp: 0.0,
        };
        let out = ekf_update(&s, &m).unwrap();
        assert!((out.v - 0.7).abs() < 1e-6);
        assert!(out.omega.abs() < 1e-6);
    }

    #[test]
    fn scalar_kalman_fixture() {
        // Prior x ~ (0, 1), measurement x = 1 with variance 1: posterior
        // must be exactly (0.5, 0.5) because everything is diagonal.
        let s = EkfState::new(Pose2::identity(), Matrix5::identity(), 0.0);
        let m = Measurement {
            kind: MeasurementKind::ScanOdom {
                pose: Pose2::new(1.0, 0.0, 0.0),
                noise: Matrix3::identity(),
            },
            stamp: 0.0,
        };
        let out = ekf_update(&s, &m).unwrap();
        assert!((out.pose.x - 0.5).abs() < 1e-12);
        assert!((out.covariance[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stale_measurement_rejected() {
        let mut s = fresh_state();
        s.stamp = 2.0;
        let m = Measurement {
            kind: MeasurementKind::ImuYaw {
                omega: 0.1,
                noise: 0.01,
            },
            stamp: 1.5,
        };
        assert!(matches!(
            ekf_update(&s, &m),
            Err(EstimationError::StaleMeasurement { .. })
        ));
    }

    #[test]
    fn non_psd_noise_rejected() {
        let s = fresh_state();
        let m = Measurement {
            kind: MeasurementKind::WheelOdom {
                v: 0.0,
                omega: 0.0,
                noise: Matrix2::new(1.0, 0.0, 0.0, -1.0),
            },
            stamp: 0.0,
        };
        assert!(matches!(
            ekf_update(&s, &m),
            Err(EstimationError::InvalidNoise(_))
        ));
    }

    #[test]
    fn angle_innovation_wraps() {
        let mut s = fresh_state();
        s.pose = Pose2::new(0.0, 0.0, 3.1);
        let m = Measurement {
            kind: MeasurementKind::ScanOdom {
                pose: Pose2::new(0.0, 0.0, -3.1),
                noise: Matrix3::zeros(),
            },
            stamp: 0.0,
        };
        let out = ekf_update(&s, &m).unwrap();
        // Wrapped innovation moves through pi, not back through zero.
        assert!((normalize_angle(out.pose.theta() + 3.1)).abs() < 1e-9);
    }

    #[test]
    fn compose_map_pose_cases() {
        let mut local = fresh_state();
        local.pose = Pose2::new(2.0, 1.0, 0.3);
        let id = MapCorrection::identity();
        let p = compose_map_pose(&id, &local);
        assert_eq!(p, local.pose);

        let corr = MapCorrection {
            t_ml: Pose2::new(1.0, 0.0, 0.0),
            stamp: 0.0,
            fitness: 0.0,
        };
        let mut origin = fresh_state();
        origin.pose = Pose2::identity();
        let p = compose_map_pose(&corr, &origin);
        assert_eq!(p, Pose2::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn correction_filter_cases() {
        let prev = MapCorrection::identity();
        let fresh = MapCorrection {
            t_ml: Pose2::new(1.0, 0.0, 0.0),
            stamp: 1.0,
            fitness: 0.05,
        };
        // alpha = 1 takes the new transform outright.
        let out = correction_filter(&prev, &fresh, 1.0, 0.3);
        assert!((out.t_ml.x - 1.0).abs() < 1e-12);
        // Gate rejects poor fits.
        let bad = MapCorrection {
            fitness: 0.5,
            ..fresh
        };
        let out = correction_filter(&prev, &bad, 0.5, 0.3);
        assert_eq!(out.t_ml, prev.t_ml);
        // Geodesic midpoint of a pure translation.
        let out = correction_filter(&prev, &fresh, 0.5, 0.3);
        assert!((out.t_ml.x - 0.5).abs() < 1e-12);
        assert!(out.t_ml.y.abs() < 1e-12);
    }
}
