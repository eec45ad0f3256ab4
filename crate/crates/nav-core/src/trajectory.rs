//! Time-indexed reference trajectories consumed by the tracking controllers.

use crate::se2::Pose2;
use std::fmt::Write as _;

/// One reference sample: pose, feedforward input, and timestamp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose2,
    pub v_ref: f64,
    pub omega_ref: f64,
}

/// A uniformly time-sampled reference trajectory. Sample `k` is stamped
/// `k * dt`; `v_ref` is non-negative everywhere (forward-only motion).
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTrajectory {
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
}

impl ReferenceTrajectory {
    pub fn new(dt: f64, samples: Vec<TrajectorySample>) -> Self {
        ReferenceTrajectory { dt, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Sample index active at time `t` (nearest by timestamp, clamped).
    pub fn index_at(&self, t: f64) -> usize {
        if self.samples.is_empty() {
            return 0;
        }
        let k = (t / self.dt).round();
        (k.max(0.0) as usize).min(self.samples.len() - 1)
    }

    /// A horizon window of `n` samples starting at `start`. Indices past the
    /// end are padded with the final pose and zero feedforward, so a
    /// controller regulates to a stop at the end of the trajectory.
    pub fn window(&self, start: usize, n: usize) -> Vec<TrajectorySample> {
        let last = self.samples.len() - 1;
        (0..n)
            .map(|i| {
                let k = start + i;
                if k <= last {
                    self.samples[k]
                } else {
                    TrajectorySample {
                        t: k as f64 * self.dt,
                        pose: self.samples[last].pose,
                        v_ref: 0.0,
                        omega_ref: 0.0,
                    }
                }
            })
            .collect()
    }

    /// Euclidean distance from a point to the nearest point on the sampled
    /// path polyline.
    pub fn distance_to_path(&self, x: f64, y: f64) -> f64 {
        let mut best = f64::INFINITY;
        for pair in self.samples.windows(2) {
            let (a, b) = (pair[0].pose, pair[1].pose);
            best = best.min(point_segment_distance(x, y, a.x, a.y, b.x, b.y));
        }
        if self.samples.len() == 1 {
            let p = self.samples[0].pose;
            best = ((x - p.x).powi(2) + (y - p.y).powi(2)).sqrt();
        }
        best
    }

    /// CSV export: header `t,x,y,theta,v_ref,omega_ref`, one row per sample,
    /// 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,y,theta,v_ref,omega_ref\n");
        for smp in &self.samples {
            let _ = writeln!(
                s,
                "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                smp.t,
                smp.pose.x,
                smp.pose.y,
                smp.pose.theta(),
                smp.v_ref,
                smp.omega_ref
            );
        }
        s
    }
}

pub fn point_segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(n: usize, dt: f64, v: f64) -> ReferenceTrajectory {
        let samples = (0..n)
            .map(|k| TrajectorySample {
                t: k as f64 * dt,
                pose: Pose2::new(k as f64 * v * dt, 0.0, 0.0),
                v_ref: v,
                omega_ref: 0.0,
            })
            .collect();
        ReferenceTrajectory::new(dt, samples)
    }

    #[test]
    fn window_pads_with_terminal_hold() {
        let traj = straight(5, 0.1, 1.0);
        let w = traj.window(3, 4);
        assert_eq!(w.len(), 4);
        assert!((w[0].pose.x - 0.3).abs() < 1e-12);
        assert!((w[1].pose.x - 0.4).abs() < 1e-12);
        assert_eq!(w[2].pose.x, w[1].pose.x);
        assert_eq!(w[2].v_ref, 0.0);
        assert_eq!(w[3].v_ref, 0.0);
    }

    #[test]
    fn index_at_clamps() {
        let traj = straight(5, 0.1, 1.0);
        assert_eq!(traj.index_at(-1.0), 0);
        assert_eq!(traj.index_at(0.21), 2);
        assert_eq!(traj.index_at(10.0), 4);
    }

    #[test]
    fn distance_to_path_uses_segments() {
        let traj = straight(11, 0.1, 1.0);
        // Point between samples still measures pure cross-track distance.
        assert!((traj.distance_to_path(0.55, 0.2) - 0.2).abs() < 1e-12);
        assert!((traj.distance_to_path(-1.0, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let traj = straight(3, 0.1, 1.0);
        let csv = traj.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "t,x,y,theta,v_ref,omega_ref");
        assert!(lines[1].starts_with("0.00000000e0,"));
    }
}
