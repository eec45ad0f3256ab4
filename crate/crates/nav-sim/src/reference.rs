//! Benchmark reference trajectories: a Bernoulli lemniscate and a rounded
//! square, both arc-length parameterized at constant speed.

use nav_core::planner::{PlanarCurve, Segment};
use nav_core::se2::Pose2;
use nav_core::trajectory::{ReferenceTrajectory, TrajectorySample};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("invalid reference parameter: {0}")]
    InvalidParameter(String),
}

/// Lemniscate of Bernoulli (polar r^2 = a^2 cos 2u) in its standard
/// rational parameterization.
fn lemniscate_position(a: f64, u: f64) -> (f64, f64) {
    let d = 1.0 + u.sin() * u.sin();
    (a * u.cos() / d, a * u.sin() * u.cos() / d)
}

fn lemniscate_velocity(a: f64, u: f64) -> (f64, f64) {
    let s = u.sin();
    let d = 1.0 + s * s;
    let dx = -a * s * (3.0 - s * s) / (d * d);
    let two_u = 2.0 * u;
    let dy = a * (two_u.cos() * d - 0.5 * two_u.sin() * two_u.sin()) / (d * d);
    (dx, dy)
}

/// Signed curvature from analytic first derivatives and centrally
/// differenced second derivatives.
fn lemniscate_curvature(a: f64, u: f64) -> f64 {
    let h = 1e-6;
    let (dx, dy) = lemniscate_velocity(a, u);
    let (dxp, dyp) = lemniscate_velocity(a, u + h);
    let (dxm, dym) = lemniscate_velocity(a, u - h);
    let ddx = (dxp - dxm) / (2.0 * h);
    let ddy = (dyp - dym) / (2.0 * h);
    let speed2 = dx * dx + dy * dy;
    (dx * ddy - dy * ddx) / speed2.powf(1.5)
}

/// Constant-speed sampling of the figure-eight: one full lap starting at
/// (a, 0), headings tangent, `omega_ref = v_ref * kappa`.
pub fn lemniscate_ref(a: f64, v_ref: f64, dt: f64) -> Result<ReferenceTrajectory, ReferenceError> {
    if a <= 0.0 {
        return Err(ReferenceError::InvalidParameter(format!(
            "lemniscate half-width must be positive, got {a}"
        )));
    }
    if v_ref <= 0.0 || dt <= 0.0 {
        return Err(ReferenceError::InvalidParameter(
            "v_ref and dt must be positive".into(),
        ));
    }

    // Arc-length table over one period.
    const N: usize = 20_000;
    let mut cum = Vec::with_capacity(N + 1);
    cum.push(0.0);
    let mut prev = lemniscate_position(a, 0.0);
    let mut total = 0.0;
    for i in 1..=N {
        let u = 2.0 * PI * i as f64 / N as f64;
        let p = lemniscate_position(a, u);
        total += (p.0 - prev.0).hypot(p.1 - prev.1);
        cum.push(total);
        prev = p;
    }
    let u_at = |s: f64| -> f64 {
        let i = cum.partition_point(|&c| c < s).min(N);
        if i == 0 {
            return 0.0;
        }
        let (c0, c1) = (cum[i - 1], cum[i]);
        let frac = if c1 > c0 { (s - c0) / (c1 - c0) } else { 0.0 };
        2.0 * PI * ((i - 1) as f64 + frac) / N as f64
    };

    let steps = (total / (v_ref * dt) + 1e-9).floor() as usize;
    let samples = (0..=steps)
        .map(|k| {
            let u = u_at(k as f64 * v_ref * dt);
            let (x, y) = lemniscate_position(a, u);
            let (dx, dy) = lemniscate_velocity(a, u);
            TrajectorySample {
                t: k as f64 * dt,
                pose: Pose2::new(x, y, dy.atan2(dx)),
                v_ref,
                omega_ref: v_ref * lemniscate_curvature(a, u),
            }
        })
        .collect();
    Ok(ReferenceTrajectory::new(dt, samples))
}

/// Rounded square loop: four straightaways joined by quarter-circle
/// fillets, starting at the midpoint of the bottom edge heading +x
/// (counter-clockwise lap).
pub fn square_ref(
    side: f64,
    corner_radius: f64,
    v_ref: f64,
    dt: f64,
) -> Result<ReferenceTrajectory, ReferenceError> {
    if side <= 2.0 * corner_radius {
        return Err(ReferenceError::InvalidParameter(format!(
            "side {side} must exceed twice the corner radius {corner_radius}"
        )));
    }
    if corner_radius <= 0.0 || v_ref <= 0.0 || dt <= 0.0 {
        return Err(ReferenceError::InvalidParameter(
            "corner_radius, v_ref and dt must be positive".into(),
        ));
    }
    let (s, r) = (side, corner_radius);
    let line = |ax: f64, ay: f64, bx: f64, by: f64| Segment::Line { ax, ay, bx, by };
    let arc = |cx: f64, cy: f64, a0: f64| Segment::Arc {
        cx,
        cy,
        radius: r,
        start_angle: a0,
        sweep: FRAC_PI_2,
    };
    let segments = vec![
        line(s / 2.0, 0.0, s - r, 0.0),
        arc(s - r, r, -FRAC_PI_2),
        line(s, r, s, s - r),
        arc(s - r, s - r, 0.0),
        line(s - r, s, r, s),
        arc(r, s - r, FRAC_PI_2),
        line(0.0, s - r, 0.0, r),
        arc(r, r, PI),
        line(r, 0.0, s / 2.0, 0.0),
    ];
    let curve = PlanarCurve::from_segments(segments)
        .map_err(|e| ReferenceError::InvalidParameter(e.to_string()))?;
    curve
        .to_trajectory(v_ref, dt)
        .map_err(|e| ReferenceError::InvalidParameter(e.to_string()))
}
