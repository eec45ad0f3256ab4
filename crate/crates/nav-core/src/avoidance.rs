//! Local obstacle avoidance: conflict detection along the active reference
//! trajectory and cubic Bezier detours spliced in place of the affected
//! samples.
//!
//! The detour pins its endpoints on the original path and shifts the two
//! interior control points along the chord normal, away from the obstacle,
//! far enough to restore clearance. Obstacle motion is handled by
//! constant-velocity extrapolation over the detour window, and the chosen
//! offset is verified by dense sampling before the detour is accepted.

use crate::grid::OccupancyGrid;
use crate::se2::Pose2;
use crate::trajectory::{ReferenceTrajectory, TrajectorySample};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AvoidanceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "avoidance infeasible: required offset {required:.3} exceeds limit {limit:.3}"
    )]
    Infeasible { required: f64, limit: f64 },
    #[error("detour leaves free space at curve parameter {t:.3}")]
    BlockedDetour { t: f64 },
}

/// A detected obstacle: position and radius now, with an estimated velocity
/// (zero for static obstacles).
#[derive(Clone, Copy, Debug)]
pub struct ObstacleObservation {
    pub center: (f64, f64),
    pub radius: f64,
    pub velocity: (f64, f64),
}

impl ObstacleObservation {
    /// Constant-velocity extrapolation from the observation time.
    pub fn predict(&self, dt: f64) -> (f64, f64) {
        (
            self.center.0 + self.velocity.0 * dt,
            self.center.1 + self.velocity.1 * dt,
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AvoidanceConfig {
    /// Arc length ahead of the current sample that is monitored.
    pub lookahead: f64,
    /// Required margin beyond the obstacle radius.
    pub clearance: f64,
    /// Vehicle half-extent added when sizing the normal offset.
    pub safety_margin: f64,
    /// The normal offset may not exceed `h_max_factor * (radius + clearance)`.
    pub h_max_factor: f64,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        AvoidanceConfig {
            lookahead: 5.0,
            clearance: 0.5,
            safety_margin: 0.5,
            h_max_factor: 5.0,
        }
    }
}

/// A conflict window on the active trajectory.
#[derive(Clone, Copy, Debug)]
pub struct Conflict {
    pub entry_index: usize,
    pub exit_index: usize,
    /// Sample index the robot occupied when the conflict was observed; the
    /// detour never reaches at or before this index, and obstacle motion is
    /// extrapolated from this sample's timestamp.
    pub from_index: usize,
    pub obstacle: ObstacleObservation,
}

/// Cubic Bezier detour pinned on the trajectory at `entry_index` and
/// `exit_index`.
#[derive(Clone, Copy, Debug)]
pub struct DetourSegment {
    pub p0: (f64, f64),
    pub p1: (f64, f64),
    pub p2: (f64, f64),
    pub p3: (f64, f64),
    pub entry_index: usize,
    pub exit_index: usize,
}

/// Exact Bernstein evaluation of the cubic
/// `B(t) = (1-t)^3 P0 + 3(1-t)^2 t P1 + 3(1-t) t^2 P2 + t^3 P3`.
pub fn bezier_point(
    p0: (f64, f64),
    p1: (f64, f64),
    p2: (f64, f64),
    p3: (f64, f64),
    t: f64,
) -> Result<(f64, f64), AvoidanceError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(AvoidanceError::InvalidArgument(format!(
            "t = {t} outside [0, 1]"
        )));
    }
    Ok(bezier_eval(p0, p1, p2, p3, t))
}

fn bezier_eval(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64), p3: (f64, f64), t: f64) -> (f64, f64) {
    let s = 1.0 - t;
    let b0 = s * s * s;
    let b1 = 3.0 * s * s * t;
    let b2 = 3.0 * s * t * t;
    let b3 = t * t * t;
    (
        b0 * p0.0 + b1 * p1.0 + b2 * p2.0 + b3 * p3.0,
        b0 * p0.1 + b1 * p1.1 + b2 * p2.1 + b3 * p3.1,
    )
}

fn bezier_derivative(
    p0: (f64, f64),
    p1: (f64, f64),
    p2: (f64, f64),
    p3: (f64, f64),
    t: f64,
) -> (f64, f64) {
    let s = 1.0 - t;
    (
        3.0 * s * s * (p1.0 - p0.0) + 6.0 * s * t * (p2.0 - p1.0) + 3.0 * t * t * (p3.0 - p2.0),
        3.0 * s * s * (p1.1 - p0.1) + 6.0 * s * t * (p2.1 - p1.1) + 3.0 * t * t * (p3.1 - p2.1),
    )
}

fn bezier_second_derivative(
    p0: (f64, f64),
    p1: (f64, f64),
    p2: (f64, f64),
    p3: (f64, f64),
    t: f64,
) -> (f64, f64) {
    let s = 1.0 - t;
    (
        6.0 * s * (p2.0 - 2.0 * p1.0 + p0.0) + 6.0 * t * (p3.0 - 2.0 * p2.0 + p1.0),
        6.0 * s * (p2.1 - 2.0 * p1.1 + p0.1) + 6.0 * t * (p3.1 - 2.0 * p2.1 + p1.1),
    )
}

/// Signed curvature of the cubic at `t`.
fn bezier_curvature(d: &DetourSegment, t: f64) -> f64 {
    let v = bezier_derivative(d.p0, d.p1, d.p2, d.p3, t);
    let a = bezier_second_derivative(d.p0, d.p1, d.p2, d.p3, t);
    let speed2 = v.0 * v.0 + v.1 * v.1;
    if speed2 < 1e-18 {
        return 0.0;
    }
    (v.0 * a.1 - v.1 * a.0) / speed2.powf(1.5)
}

/// Scan the trajectory ahead of `from_index` (up to `lookahead` arc length)
/// for samples in conflict with any obstacle at its predicted position, and
/// return the first maximal conflicting run expanded by one clearance-length
/// margin per side.
pub fn detect_conflict(
    traj: &ReferenceTrajectory,
    from_index: usize,
    obstacles: &[ObstacleObservation],
    cfg: &AvoidanceConfig,
) -> Option<Conflict> {
    if traj.samples.is_empty() || from_index >= traj.samples.len() || obstacles.is_empty() {
        return None;
    }
    let t_now = traj.samples[from_index].t;

    let conflicting = |k: usize| -> Option<(usize, f64)> {
        let s = &traj.samples[k];
        let mut best: Option<(usize, f64)> = None;
        for (i, obs) in obstacles.iter().enumerate() {
            let c = obs.predict(s.t - t_now);
            let d = (s.pose.x - c.0).hypot(s.pose.y - c.1);
            if d < obs.radius + cfg.clearance && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    };

    let mut arc = 0.0;
    let mut run_start: Option<(usize, usize)> = None; // (first index, obstacle)
    let mut run_end = 0;
    let mut k = from_index;
    while k < traj.samples.len() && arc <= cfg.lookahead {
        match (conflicting(k), run_start) {
            (Some((obs_i, _)), None) => {
                run_start = Some((k, obs_i));
                run_end = k;
            }
            (Some(_), Some(_)) => run_end = k,
            (None, Some(_)) => break,
            (None, None) => {}
        }
        if k + 1 < traj.samples.len() {
            let a = &traj.samples[k].pose;
            let b = &traj.samples[k + 1].pose;
            arc += (b.x - a.x).hypot(b.y - a.y);
        }
        k += 1;
    }

    let (first, obs_i) = run_start?;
    let spacing = sample_spacing(traj);
    let margin = (cfg.clearance / spacing).ceil() as usize;
    let entry_index = first.saturating_sub(margin).max(from_index);
    let exit_index = (run_end + margin).min(traj.samples.len() - 1);
    if entry_index >= exit_index {
        return None;
    }
    Some(Conflict {
        entry_index,
        exit_index,
        from_index,
        obstacle: obstacles[obs_i],
    })
}

fn sample_spacing(traj: &ReferenceTrajectory) -> f64 {
    traj.samples
        .get(1)
        .map(|s| (s.pose.x - traj.samples[0].pose.x).hypot(s.pose.y - traj.samples[0].pose.y))
        .unwrap_or(1e-3)
        .max(1e-6)
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    crate::trajectory::point_segment_distance(p.0, p.1, a.0, a.1, b.0, b.1)
}

/// Chord length must be at least this multiple of the normal offset, so the
/// detour's entry/exit tangents stay shallow (atan(3/12) ~ 14 degrees).
const CHORD_PER_OFFSET: f64 = 12.0;

/// Build the Bezier detour for a conflict window. The window is widened
/// beyond the detected run (clamped to the trajectory ends and the robot's
/// current index) until the chord is long enough for a shallow entry.
/// `inflated_grid`, when given, rejects detours that leave free space.
pub fn build_detour(
    traj: &ReferenceTrajectory,
    conflict: &Conflict,
    cfg: &AvoidanceConfig,
    inflated_grid: Option<&OccupancyGrid>,
) -> Result<DetourSegment, AvoidanceError> {
    let (mut entry, mut exit) = (conflict.entry_index, conflict.exit_index);
    if entry >= exit || exit >= traj.samples.len() || conflict.from_index >= traj.samples.len() {
        return Err(AvoidanceError::InvalidArgument(format!(
            "bad conflict window [{entry}, {exit}]"
        )));
    }
    let obs = &conflict.obstacle;
    let now = traj.samples[conflict.from_index].t;
    let reach = obs.radius + cfg.clearance;
    let h_max = cfg.h_max_factor * reach;

    // Widen the window until the chord can carry the offset gently. The
    // offset estimate is refreshed because widening moves the chord.
    let spacing = sample_spacing(traj);
    let last = traj.samples.len() - 1;
    let mut h_needed = 0.0;
    for _ in 0..4 {
        let a = traj.samples[entry].pose;
        let b = traj.samples[exit].pose;
        let c_mid = obs.predict(0.5 * (traj.samples[entry].t + traj.samples[exit].t) - now);
        let d_chord = point_segment_distance(c_mid, (a.x, a.y), (b.x, b.y));
        h_needed = (reach + cfg.safety_margin - d_chord).max(0.0);
        let chord_len = (b.x - a.x).hypot(b.y - a.y);
        let deficit = CHORD_PER_OFFSET * h_needed - chord_len;
        if deficit <= 0.0 {
            break;
        }
        let extend = ((0.5 * deficit / spacing).ceil() as usize).max(1);
        let new_entry = entry.saturating_sub(extend).max(conflict.from_index);
        let new_exit = (exit + extend).min(last);
        if new_entry == entry && new_exit == exit {
            break; // clamped at both ends
        }
        entry = new_entry;
        exit = new_exit;
    }

    let a = traj.samples[entry].pose;
    let b = traj.samples[exit].pose;
    let p0 = (a.x, a.y);
    let p3 = (b.x, b.y);
    let chord = (p3.0 - p0.0, p3.1 - p0.1);
    let chord_len = chord.0.hypot(chord.1);
    if chord_len < 1e-9 {
        return Err(AvoidanceError::InvalidArgument(
            "degenerate conflict window".into(),
        ));
    }

    let t_entry = traj.samples[entry].t;
    let t_exit = traj.samples[exit].t;
    let c_mid = obs.predict(0.5 * (t_entry + t_exit) - now);

    // Offset direction: chord normal pointing away from the obstacle.
    let n = (-chord.1 / chord_len, chord.0 / chord_len);
    let side = n.0 * (c_mid.0 - p0.0) + n.1 * (c_mid.1 - p0.1);
    let dir = if side > 0.0 { (-n.0, -n.1) } else { n };

    let clearance_ok = |d: &DetourSegment| -> bool {
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let p = bezier_eval(d.p0, d.p1, d.p2, d.p3, t);
            let tau = t_entry + t * (t_exit - t_entry);
            let c = obs.predict(tau - now);
            if (p.0 - c.0).hypot(p.1 - c.1) < reach - 1e-9 {
                return false;
            }
        }
        true
    };

    let make = |h: f64| DetourSegment {
        p0,
        p1: (
            p0.0 + chord.0 / 3.0 + h * dir.0,
            p0.1 + chord.1 / 3.0 + h * dir.1,
        ),
        p2: (
            p0.0 + 2.0 * chord.0 / 3.0 + h * dir.0,
            p0.1 + 2.0 * chord.1 / 3.0 + h * dir.1,
        ),
        p3,
        entry_index: entry,
        exit_index: exit,
    };

    let mut h = h_needed;
    let detour = loop {
        if h > h_max {
            return Err(AvoidanceError::Infeasible {
                required: h,
                limit: h_max,
            });
        }
        let candidate = make(h);
        if clearance_ok(&candidate) {
            break candidate;
        }
        h += 0.1 * reach;
    };

    if let Some(grid) = inflated_grid {
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let p = bezier_eval(detour.p0, detour.p1, detour.p2, detour.p3, t);
            let free = grid
                .world_to_cell(p.0, p.1)
                .map(|c| grid.is_free(c))
                .unwrap_or(false);
            if !free {
                return Err(AvoidanceError::BlockedDetour { t });
            }
        }
    }

    Ok(detour)
}

/// Replace the samples strictly inside the detour window with arc-length
/// resampled Bezier points. Samples outside the window keep their poses and
/// feedforward bitwise; timestamps are rebuilt to stay uniform.
pub fn splice(
    traj: &ReferenceTrajectory,
    d: &DetourSegment,
    v_ref: f64,
    dt: f64,
) -> ReferenceTrajectory {
    // Arc-length table of the Bezier.
    const N: usize = 1000;
    let mut cum = Vec::with_capacity(N + 1);
    cum.push(0.0);
    let mut prev = bezier_eval(d.p0, d.p1, d.p2, d.p3, 0.0);
    let mut total = 0.0;
    for i in 1..=N {
        let t = i as f64 / N as f64;
        let p = bezier_eval(d.p0, d.p1, d.p2, d.p3, t);
        total += (p.0 - prev.0).hypot(p.1 - prev.1);
        cum.push(total);
        prev = p;
    }
    let t_at = |s: f64| -> f64 {
        let i = cum.partition_point(|&c| c < s).min(N);
        if i == 0 {
            return 0.0;
        }
        let (c0, c1) = (cum[i - 1], cum[i]);
        let frac = if c1 > c0 { (s - c0) / (c1 - c0) } else { 0.0 };
        ((i - 1) as f64 + frac) / N as f64
    };

    let m = ((total / (v_ref * dt)).round() as usize).max(1);
    let step = total / m as f64;

    let mut samples: Vec<TrajectorySample> = Vec::new();
    samples.extend_from_slice(&traj.samples[..=d.entry_index]);
    for j in 1..m {
        let t = t_at(j as f64 * step);
        let p = bezier_eval(d.p0, d.p1, d.p2, d.p3, t);
        let tangent = bezier_derivative(d.p0, d.p1, d.p2, d.p3, t);
        let heading = tangent.1.atan2(tangent.0);
        let kappa = bezier_curvature(d, t);
        samples.push(TrajectorySample {
            t: 0.0, // re-stamped below
            pose: Pose2::new(p.0, p.1, heading),
            v_ref,
            omega_ref: v_ref * kappa,
        });
    }
    samples.extend_from_slice(&traj.samples[d.exit_index..]);

    for (k, s) in samples.iter_mut().enumerate() {
        s.t = k as f64 * dt;
    }
    ReferenceTrajectory::new(dt, samples)
}
