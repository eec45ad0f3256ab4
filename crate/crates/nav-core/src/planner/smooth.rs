//! Arc-fillet smoothing of waypoint paths and constant-speed resampling.
//!
//! A pruned waypoint path is turned into a G1 curve of straight lines and
//! circular corner fillets, which has closed-form curvature everywhere. The
//! curve is then arc-length sampled at `v_ref * dt` so the resulting
//! [`ReferenceTrajectory`] moves at constant speed with `omega_ref = v_ref *
//! kappa` as feedforward.

use super::{PlanError, PlannedPath};
use crate::se2::Pose2;
use crate::trajectory::{ReferenceTrajectory, TrajectorySample};
use std::f64::consts::FRAC_PI_2;

/// A curve primitive with closed-form length and curvature.
#[derive(Clone, Copy, Debug)]
pub enum Segment {
    Line {
        ax: f64,
        ay: f64,
        bx: f64,
        by: f64,
    },
    /// Circular arc around (cx, cy): `sweep` is the signed heading change,
    /// positive for a left turn.
    Arc {
        cx: f64,
        cy: f64,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { ax, ay, bx, by } => ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt(),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Position, tangent heading, and signed curvature at arc length `s`
    /// into the segment.
    pub fn sample(&self, s: f64) -> (f64, f64, f64, f64) {
        match *self {
            Segment::Line { ax, ay, bx, by } => {
                let len = self.length();
                let t = if len > 0.0 { s / len } else { 0.0 };
                let heading = (by - ay).atan2(bx - ax);
                (ax + t * (bx - ax), ay + t * (by - ay), heading, 0.0)
            }
            Segment::Arc {
                cx,
                cy,
                radius,
                start_angle,
                sweep,
            } => {
                let sign = sweep.signum();
                let a = start_angle + sign * s / radius;
                let x = cx + radius * a.cos();
                let y = cy + radius * a.sin();
                let heading = a + sign * FRAC_PI_2;
                (x, y, heading, sign / radius)
            }
        }
    }
}

/// A piecewise line/arc curve with cumulative arc length.
#[derive(Clone, Debug)]
pub struct PlanarCurve {
    segments: Vec<Segment>,
    cumulative: Vec<f64>,
}

impl PlanarCurve {
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self, PlanError> {
        let mut cumulative = Vec::with_capacity(segments.len() + 1);
        cumulative.push(0.0);
        let mut total = 0.0;
        for seg in &segments {
            total += seg.length();
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Err(PlanError::InvalidArgument(
                "curve has zero total length".into(),
            ));
        }
        Ok(PlanarCurve {
            segments,
            cumulative,
        })
    }

    /// Build the fillet-smoothed curve of an open waypoint polyline. Corner
    /// radii are `min(corner_radius, half the shorter adjacent segment)`,
    /// further shrunk where a sharp corner's tangent length would otherwise
    /// overrun its segment.
    pub fn from_waypoints(points: &[(f64, f64)], corner_radius: f64) -> Result<Self, PlanError> {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for &p in points {
            if pts
                .last()
                .map_or(true, |q: &(f64, f64)| (q.0 - p.0).hypot(q.1 - p.1) > 1e-12)
            {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return Err(PlanError::InvalidArgument(
                "need at least two distinct waypoints".into(),
            ));
        }

        let seg_len: Vec<f64> = pts
            .windows(2)
            .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
            .collect();

        let mut segments = Vec::new();
        // Current point where the next line segment starts.
        let mut cursor = pts[0];
        for i in 1..pts.len() - 1 {
            let u = unit(pts[i - 1], pts[i]);
            let w = unit(pts[i], pts[i + 1]);
            let ext = (u.0 * w.1 - u.1 * w.0).atan2(u.0 * w.0 + u.1 * w.1);
            let half = 0.5 * seg_len[i - 1].min(seg_len[i]);
            if ext.abs() < 1e-9 || ext.abs() > std::f64::consts::PI - 1e-9 {
                // Straight through or a full reversal: keep the corner sharp.
                push_line(&mut segments, cursor, pts[i]);
                cursor = pts[i];
                continue;
            }
            let mut r = corner_radius.min(half);
            let tan_half = (ext.abs() / 2.0).tan();
            let mut d = r * tan_half;
            if d > half {
                d = half;
                r = d / tan_half;
            }
            if r <= 1e-9 {
                push_line(&mut segments, cursor, pts[i]);
                cursor = pts[i];
                continue;
            }
            let q_in = (pts[i].0 - u.0 * d, pts[i].1 - u.1 * d);
            let q_out = (pts[i].0 + w.0 * d, pts[i].1 + w.1 * d);
            push_line(&mut segments, cursor, q_in);
            let sign = ext.signum();
            // Arc center sits on the inward normal of the incoming tangent.
            let n = (-u.1 * sign, u.0 * sign);
            let center = (q_in.0 + n.0 * r, q_in.1 + n.1 * r);
            let start_angle = (q_in.1 - center.1).atan2(q_in.0 - center.0);
            segments.push(Segment::Arc {
                cx: center.0,
                cy: center.1,
                radius: r,
                start_angle,
                sweep: ext,
            });
            cursor = q_out;
        }
        push_line(&mut segments, cursor, pts[pts.len() - 1]);
        PlanarCurve::from_segments(segments)
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Position, heading and curvature at arc length `s` (clamped).
    pub fn sample(&self, s: f64) -> (f64, f64, f64, f64) {
        let s = s.clamp(0.0, self.total_length());
        // Last segment with cumulative start <= s.
        let mut idx = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        if idx >= self.segments.len() {
            idx = self.segments.len() - 1;
        }
        // Skip zero-length segments so junction samples use the outgoing
        // segment's curvature.
        while idx + 1 < self.segments.len() && self.cumulative[idx + 1] <= s {
            idx += 1;
        }
        self.segments[idx].sample(s - self.cumulative[idx])
    }

    /// Arc-length resampling at constant speed `v_ref`, one sample every
    /// `dt` seconds. The final partial step is dropped, so consecutive
    /// samples are spaced exactly `v_ref * dt` along the curve.
    pub fn to_trajectory(&self, v_ref: f64, dt: f64) -> Result<ReferenceTrajectory, PlanError> {
        if v_ref <= 0.0 || dt <= 0.0 {
            return Err(PlanError::InvalidArgument(
                "v_ref and dt must be positive".into(),
            ));
        }
        let step = v_ref * dt;
        let n = (self.total_length() / step + 1e-9).floor() as usize;
        let samples = (0..=n)
            .map(|k| {
                let (x, y, heading, kappa) = self.sample(k as f64 * step);
                TrajectorySample {
                    t: k as f64 * dt,
                    pose: Pose2::new(x, y, heading),
                    v_ref,
                    omega_ref: v_ref * kappa,
                }
            })
            .collect();
        Ok(ReferenceTrajectory::new(dt, samples))
    }
}

fn push_line(segments: &mut Vec<Segment>, a: (f64, f64), b: (f64, f64)) {
    if (b.0 - a.0).hypot(b.1 - a.1) > 1e-12 {
        segments.push(Segment::Line {
            ax: a.0,
            ay: a.1,
            bx: b.0,
            by: b.1,
        });
    }
}

fn unit(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    (dx / len, dy / len)
}

/// Smooth a planned path with corner fillets and sample it into a
/// constant-speed reference trajectory.
pub fn generate_reference(
    path: &PlannedPath,
    v_ref: f64,
    dt: f64,
    corner_radius: f64,
) -> Result<ReferenceTrajectory, PlanError> {
    let curve = PlanarCurve::from_waypoints(&path.world_points, corner_radius)?;
    curve.to_trajectory(v_ref, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se2::{exp_se2, normalize_angle, Twist2};

    #[test]
    fn straight_path_sampling() {
        let curve = PlanarCurve::from_waypoints(&[(0.0, 0.0), (10.0, 0.0)], 0.5).unwrap();
        let traj = curve.to_trajectory(1.0, 0.1).unwrap();
        assert_eq!(traj.len(), 101);
        for s in &traj.samples {
            assert_eq!(s.omega_ref, 0.0);
            assert!(s.pose.theta().abs() < 1e-12);
        }
        assert!((traj.samples[100].pose.x - 10.0).abs() < 1e-9);
    }

    #[test]
    fn right_angle_fillet_has_unit_curvature() {
        let curve =
            PlanarCurve::from_waypoints(&[(0.0, 0.0), (5.0, 0.0), (5.0, 5.0)], 1.0).unwrap();
        // Quarter arc of radius 1: length 4 + pi/2 * 1 + 4.
        let expect = 4.0 + std::f64::consts::FRAC_PI_2 + 4.0;
        assert!((curve.total_length() - expect).abs() < 1e-9);

        let traj = curve.to_trajectory(1.0, 0.05).unwrap();
        let mut on_arc = 0;
        let mut heading_min: f64 = f64::INFINITY;
        let mut heading_max: f64 = f64::NEG_INFINITY;
        for s in &traj.samples {
            if s.omega_ref.abs() > 1e-9 {
                assert!((s.omega_ref.abs() - 1.0).abs() < 1e-9);
                on_arc += 1;
            }
            heading_min = heading_min.min(s.pose.theta());
            heading_max = heading_max.max(s.pose.theta());
        }
        assert!(on_arc > 10);
        assert!((heading_max - heading_min - std::f64::consts::FRAC_PI_2).abs() < 0.1);
    }

    #[test]
    fn sample_spacing_and_heading_rate() {
        let pts = [(0.0, 0.0), (6.0, 0.0), (6.0, 4.0), (2.0, 4.0)];
        let curve = PlanarCurve::from_waypoints(&pts, 0.8).unwrap();
        let (v, dt) = (1.2, 1.0 / 30.0);
        let traj = curve.to_trajectory(v, dt).unwrap();
        for pair in traj.samples.windows(2) {
            let d = (pair[1].pose.x - pair[0].pose.x).hypot(pair[1].pose.y - pair[0].pose.y);
            // Chord length can only fall below arc spacing on the arcs.
            assert!(d <= v * dt + 1e-6);
            assert!(d >= v * dt * 0.99);
        }
        // Finite-difference heading rate matches omega_ref away from arc
        // junctions.
        for k in 1..traj.len() - 1 {
            let w = traj.samples[k].omega_ref;
            let w_prev = traj.samples[k - 1].omega_ref;
            let w_next = traj.samples[k + 1].omega_ref;
            if (w - w_prev).abs() > 1e-9 || (w - w_next).abs() > 1e-9 {
                continue; // junction straddles the window
            }
            let dh = normalize_angle(
                traj.samples[k + 1].pose.theta() - traj.samples[k - 1].pose.theta(),
            );
            let rate = dh / (2.0 * dt);
            assert!(
                (rate - w).abs() < 1e-3,
                "heading rate {rate} vs omega_ref {w} at sample {k}"
            );
        }
    }

    #[test]
    fn trajectory_is_kinematically_consistent() {
        let pts = [(0.0, 0.0), (8.0, 0.0), (8.0, 6.0), (0.0, 6.0), (0.0, 1.0)];
        let curve = PlanarCurve::from_waypoints(&pts, 0.6).unwrap();
        let traj = curve.to_trajectory(1.0, 1.0 / 30.0).unwrap();
        for pair in traj.samples.windows(2) {
            let step = exp_se2(&Twist2::new(
                pair[0].v_ref * traj.dt,
                0.0,
                pair[0].omega_ref * traj.dt,
            ));
            let predicted = pair[0].pose.compose(&step);
            let dx = predicted.x - pair[1].pose.x;
            let dy = predicted.y - pair[1].pose.y;
            assert!(
                dx.hypot(dy) < 2e-2,
                "kinematic step error {} at t={}",
                dx.hypot(dy),
                pair[0].t
            );
        }
    }

    #[test]
    fn degenerate_path_rejected() {
        assert!(PlanarCurve::from_waypoints(&[(1.0, 1.0), (1.0, 1.0)], 0.5).is_err());
        assert!(PlanarCurve::from_waypoints(&[(1.0, 1.0)], 0.5).is_err());
    }
}
