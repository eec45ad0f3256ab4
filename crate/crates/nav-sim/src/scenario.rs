//! Scenario configuration and run records.

use crate::plant::PlantParams;
use crate::sensors::NoiseConfig;
use nav_core::control::ControllerConfig;
use nav_core::se2::Pose2;

/// Which reference trajectory a tracking scenario follows.
#[derive(Clone, Copy, Debug)]
pub enum TrajectoryKind {
    Lemniscate { half_width: f64 },
    Square { side: f64, corner_radius: f64 },
}

/// Everything a tracking experiment needs to be reproducible.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub trajectory: TrajectoryKind,
    /// Controller registry name (`"agmpc"` or `"mpc"`).
    pub controller: String,
    pub v_ref: f64,
    pub seed: u64,
    pub noise: NoiseConfig,
    pub plant: PlantParams,
    pub controller_cfg: ControllerConfig,
}

impl ScenarioConfig {
    pub fn new(trajectory: TrajectoryKind, controller: &str, v_ref: f64, seed: u64) -> Self {
        ScenarioConfig {
            trajectory,
            controller: controller.to_string(),
            v_ref,
            seed,
            noise: NoiseConfig::default(),
            plant: PlantParams::default(),
            controller_cfg: ControllerConfig::default(),
        }
    }
}

/// One control-tick record.
#[derive(Clone, Copy, Debug)]
pub struct TickRecord {
    pub t: f64,
    pub truth: Pose2,
    pub est: Pose2,
    pub reference: Pose2,
    pub v_est: f64,
    pub omega_est: f64,
    pub cmd_v: f64,
    pub cmd_omega: f64,
    pub cmd_delta: f64,
    /// Wall-clock solve time; excluded from determinism digests.
    pub solver_ms: f64,
}

/// Aggregate run results.
#[derive(Clone, Copy, Debug)]
pub struct RunSummary {
    /// Root-mean-square over control ticks of the distance between the true
    /// position and the nearest point of the reference path (spatial, not
    /// time-indexed).
    pub rmse: f64,
    pub solver_mean_ms: f64,
    pub solver_median_ms: f64,
    pub solver_p95_ms: f64,
    pub solver_max_ms: f64,
    /// False when the run aborted early (controller solver failure).
    pub completed: bool,
    /// Only meaningful for goal-directed runs.
    pub goal_reached: Option<bool>,
    pub collided: bool,
}

#[derive(Clone, Debug)]
pub struct RunLog {
    pub dt: f64,
    pub records: Vec<TickRecord>,
    pub summary: RunSummary,
}

impl RunLog {
    /// Byte digest of every deterministic field (solver wall times are
    /// excluded); two runs of the same seeded scenario must produce
    /// identical digests.
    pub fn digest(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.records.len() * 80 + 16);
        let mut push = |v: f64| out.extend_from_slice(&v.to_bits().to_le_bytes());
        push(self.dt);
        for r in &self.records {
            for v in [
                r.t,
                r.truth.x,
                r.truth.y,
                r.truth.theta(),
                r.est.x,
                r.est.y,
                r.est.theta(),
                r.reference.x,
                r.reference.y,
                r.reference.theta(),
                r.v_est,
                r.omega_est,
                r.cmd_v,
                r.cmd_omega,
                r.cmd_delta,
            ] {
                push(v);
            }
        }
        push(self.summary.rmse);
        out.push(self.summary.completed as u8);
        out.push(self.summary.collided as u8);
        out.push(match self.summary.goal_reached {
            None => 2,
            Some(false) => 0,
            Some(true) => 1,
        });
        out
    }

    pub fn solver_times_ms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.solver_ms).collect()
    }
}

/// Percentile of an unsorted sample set (nearest-rank).
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(percentile(&v, 95.0), 95.0);
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 100.0), 100.0);
        assert_eq!(percentile(&[], 95.0), 0.0);
    }
}
