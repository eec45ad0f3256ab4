//! SE(2) poses, twists, and the exponential/logarithm maps.
//!
//! Poses are stored in the compact `(x, y, theta)` form; rotation matrices
//! are only materialized transiently inside operations so that the heading
//! can be kept canonically normalized to `(-pi, pi]` at all times.

use std::f64::consts::PI;

/// Threshold below which the exp/log Jacobian switches to its series
/// expansion. Keeps relative error below 1e-12 while avoiding the
/// `sin/(1-cos)` singularity near zero rotation.
const SMALL_ANGLE: f64 = 1e-6;

/// Normalize an angle to the half-open interval `(-pi, pi]`.
///
/// The upper endpoint is kept: `normalize_angle(PI) == PI` and
/// `normalize_angle(-PI) == PI`.
pub fn normalize_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// A rigid planar transform: rotation by `theta` followed by translation.
///
/// `theta` is always normalized to `(-pi, pi]` by the constructor and by
/// every composing operation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Pose2 {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Group product `self * rhs`.
    pub fn compose(&self, rhs: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * rhs.x - s * rhs.y,
            self.y + s * rhs.x + c * rhs.y,
            self.theta + rhs.theta,
        )
    }

    /// Group inverse: `self.compose(&self.inverse())` is the identity.
    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            -(c * self.x + s * self.y),
            -(-s * self.x + c * self.y),
            -self.theta,
        )
    }

    /// Apply the transform to a point expressed in this pose's frame.
    pub fn transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }

    /// Express a world point in this pose's frame.
    pub fn inverse_transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let dx = px - self.x;
        let dy = py - self.y;
        let (s, c) = self.theta.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

/// Lie-algebra coordinates of a relative pose: the tracking error
/// `[e_x, e_y, e_psi]` expressed in the reference frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist2 {
    pub e_x: f64,
    pub e_y: f64,
    pub e_psi: f64,
}

impl Twist2 {
    pub fn new(e_x: f64, e_y: f64, e_psi: f64) -> Self {
        Twist2 { e_x, e_y, e_psi }
    }

    pub fn zero() -> Self {
        Twist2::new(0.0, 0.0, 0.0)
    }

    pub fn scale(&self, a: f64) -> Twist2 {
        Twist2::new(a * self.e_x, a * self.e_y, a * self.e_psi)
    }
}

/// `(theta/2) * cot(theta/2)`, the diagonal of the inverse left Jacobian.
fn half_cot_half(theta: f64) -> f64 {
    if theta.abs() < SMALL_ANGLE {
        1.0 - theta * theta / 12.0
    } else {
        let h = 0.5 * theta;
        h * h.cos() / h.sin()
    }
}

/// SE(2) logarithm: rotation angle plus left-Jacobian-corrected translation.
pub fn log_se2(e: &Pose2) -> Twist2 {
    let theta = e.theta();
    let a = half_cot_half(theta);
    let b = 0.5 * theta;
    Twist2::new(a * e.x + b * e.y, -b * e.x + a * e.y, theta)
}

/// SE(2) exponential, the inverse of [`log_se2`] for `|theta| < pi`.
pub fn exp_se2(xi: &Twist2) -> Pose2 {
    let theta = xi.e_psi;
    let (a, b) = if theta.abs() < SMALL_ANGLE {
        (1.0 - theta * theta / 6.0, 0.5 * theta)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta)
    };
    Pose2::new(a * xi.e_x - b * xi.e_y, b * xi.e_x + a * xi.e_y, theta)
}

/// Geometric tracking error `log(T_ref^-1 * T)` expressed in the reference
/// frame.
pub fn tracking_error(t_ref: &Pose2, t: &Pose2) -> Twist2 {
    log_se2(&t_ref.inverse().compose(t))
}
