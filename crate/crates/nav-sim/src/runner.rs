//! The deterministic closed-loop engine shared by the tracking and
//! end-to-end experiments.
//!
//! The plant integrates at the micro-step rate; wheel/IMU, scan odometry,
//! scans, map corrections, and the controller all run on their own divisor
//! schedules. Sensor noise is drawn on a fixed schedule from one seeded
//! RNG, so a given seed produces the same measurement stream regardless of
//! the controller under test.

use crate::plant::{step_bicycle, BicycleState, PlantParams};
use crate::scenario::{percentile, RunLog, RunSummary, TickRecord};
use crate::sensors::{NoiseConfig, Schedule, SensorSim};
use crate::SimError;
use nav_core::avoidance::{
    build_detour, detect_conflict, splice, AvoidanceConfig, AvoidanceError, ObstacleObservation,
};
use nav_core::control::{to_ackermann, AckermannCommand, ControllerConfig, ControllerRegistry};
use nav_core::estimation::{
    compose_map_pose, correction_filter, ekf_predict, ekf_update, icp_scan_to_map, EkfState,
    EstimationError, IcpConfig, LaserScan2, MapCorrection,
};
use nav_core::grid::{Cell, CellIndex, OccupancyGrid};
use nav_core::se2::Pose2;
use nav_core::trajectory::ReferenceTrajectory;
use nalgebra::Matrix5;
use std::time::Instant;

/// A circular obstacle moving at constant velocity, used by the dynamic
/// avoidance experiments.
#[derive(Clone, Copy, Debug)]
pub struct MovingObstacle {
    pub center0: (f64, f64),
    pub velocity: (f64, f64),
    pub radius: f64,
}

impl MovingObstacle {
    pub fn at(&self, t: f64) -> (f64, f64) {
        (
            self.center0.0 + self.velocity.0 * t,
            self.center0.1 + self.velocity.1 * t,
        )
    }

    fn observe(&self, t: f64) -> ObstacleObservation {
        ObstacleObservation {
            center: self.at(t),
            radius: self.radius,
            velocity: self.velocity,
        }
    }
}

/// Full configuration of one closed-loop run.
pub struct LoopConfig<'a> {
    pub traj: &'a ReferenceTrajectory,
    pub controller_name: &'a str,
    pub controller_cfg: ControllerConfig,
    pub plant_params: PlantParams,
    pub noise: NoiseConfig,
    pub schedule: Schedule,
    pub seed: u64,
    /// Total simulated time.
    pub duration: f64,
    /// Ground-truth world for ray-cast scans and the collision oracle.
    pub world: Option<&'a OccupancyGrid>,
    /// Scan-to-map target (the robot's own uninflated map).
    pub nav_map: Option<&'a OccupancyGrid>,
    /// Inflated map used to vet detours.
    pub inflated_map: Option<&'a OccupancyGrid>,
    pub icp_enabled: bool,
    pub obstacle: Option<MovingObstacle>,
    pub avoidance: AvoidanceConfig,
    pub footprint_radius: f64,
    pub goal: Option<(f64, f64)>,
    pub goal_tol: f64,
    /// Start the plant already moving at the reference's initial speed and
    /// curvature (benchmark laps measure steady tracking, not spin-up).
    pub start_at_speed: bool,
}

impl<'a> LoopConfig<'a> {
    /// Pure tracking: no maps, no obstacle, odom frame equals map frame.
    pub fn tracking(
        traj: &'a ReferenceTrajectory,
        controller_name: &'a str,
        controller_cfg: ControllerConfig,
        plant_params: PlantParams,
        noise: NoiseConfig,
        seed: u64,
    ) -> Self {
        let duration = traj.duration();
        LoopConfig {
            traj,
            controller_name,
            controller_cfg,
            plant_params,
            noise,
            schedule: Schedule::default(),
            seed,
            duration,
            world: None,
            nav_map: None,
            inflated_map: None,
            icp_enabled: false,
            obstacle: None,
            avoidance: AvoidanceConfig::default(),
            footprint_radius: 0.3,
            goal: None,
            goal_tol: 0.5,
            start_at_speed: true,
        }
    }
}

/// EKF process noise: modest pose diffusion, generous velocity diffusion so
/// the wheel/IMU channels stay responsive.
fn process_noise() -> Matrix5<f64> {
    Matrix5::from_diagonal(&nalgebra::Vector5::new(1e-4, 1e-4, 1e-4, 0.5, 0.5))
}

struct ActiveDetour {
    trajectory: ReferenceTrajectory,
    exit_t: f64,
}

/// Footprint collision against occupied world cells: the robot disk may not
/// overlap any occupied cell rectangle.
fn collides_with_grid(grid: &OccupancyGrid, x: f64, y: f64, radius: f64) -> bool {
    let p = grid.resolution();
    let reach = (radius / p).ceil() as i64 + 1;
    let Ok(center) = grid.world_to_cell(x, y) else {
        return false; // outside the map: nothing to hit
    };
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let col = center.col as i64 + dc;
            let row = center.row as i64 + dr;
            if col < 0 || row < 0 || col >= grid.width() as i64 || row >= grid.height() as i64 {
                continue;
            }
            let cell = CellIndex::new(col as usize, row as usize);
            if grid.cell_unchecked(cell.col, cell.row) != Cell::Occupied {
                continue;
            }
            // Distance from the point to the cell rectangle in grid frame.
            let (gx, gy) = grid.origin().inverse_transform_point(x, y);
            let (lo_x, lo_y) = (cell.col as f64 * p, cell.row as f64 * p);
            let dx = (lo_x - gx).max(0.0).max(gx - (lo_x + p));
            let dy = (lo_y - gy).max(0.0).max(gy - (lo_y + p));
            if dx.hypot(dy) < radius {
                return true;
            }
        }
    }
    false
}

/// Run the closed loop. Controller solver failures abort the run and flag
/// the partial log incomplete; avoidance infeasibility propagates as an
/// error.
pub fn run_closed_loop(cfg: &LoopConfig) -> Result<RunLog, SimError> {
    let registry = ControllerRegistry::with_defaults();
    let mut controller = registry
        .create(cfg.controller_name, cfg.controller_cfg.clone())
        .ok_or_else(|| SimError::UnknownController(cfg.controller_name.to_string()))?;
    controller.reset();

    let dt_ctrl = cfg.schedule.control_every as f64 * cfg.schedule.micro_dt();
    if (cfg.controller_cfg.dt - dt_ctrl).abs() > 1e-9 {
        return Err(SimError::Config(format!(
            "controller dt {} does not match the control schedule {}",
            cfg.controller_cfg.dt, dt_ctrl
        )));
    }
    if cfg.traj.is_empty() {
        return Err(SimError::Config("empty reference trajectory".into()));
    }

    let micro_dt = cfg.schedule.micro_dt();
    let n_micro = (cfg.duration / micro_dt).ceil() as usize;
    let horizon = controller.horizon();
    let v_ref_splice = cfg.traj.samples[0].v_ref.max(0.1);

    let start_pose = cfg.traj.samples[0].pose;
    let mut plant = BicycleState::at_rest(start_pose);
    let mut cmd = AckermannCommand { v: 0.0, delta: 0.0 };
    if cfg.start_at_speed {
        let s0 = cfg.traj.samples[0];
        plant.v_actual = s0.v_ref;
        plant.delta_actual = (s0.omega_ref * cfg.plant_params.wheelbase
            / s0.v_ref.max(cfg.controller_cfg.v_eps))
        .atan()
        .clamp(-cfg.plant_params.delta_max, cfg.plant_params.delta_max);
        cmd = AckermannCommand {
            v: plant.v_actual,
            delta: plant.delta_actual,
        };
    }

    let mut t_ml_true = Pose2::identity();
    let mut ekf = EkfState {
        pose: start_pose,
        v: plant.v_actual,
        omega: plant.omega(cfg.plant_params.wheelbase),
        covariance: Matrix5::identity() * 1e-4,
        stamp: 0.0,
    };
    let q_process = process_noise();
    let mut correction = MapCorrection::identity();
    let icp_cfg = IcpConfig::default();

    let mut sensors = SensorSim::new(cfg.seed, cfg.noise, cfg.schedule);
    let mut latest_scan: Option<LaserScan2> = None;

    let mut active: ReferenceTrajectory = cfg.traj.clone();
    let mut detour: Option<ActiveDetour> = None;

    let mut records: Vec<TickRecord> = Vec::new();
    let mut collided = false;
    let mut completed = true;

    for m in 0..=n_micro {
        let t = m as f64 * micro_dt;

        // Odom frame drift, accumulated at the scan-odometry rate.
        if m > 0 && m % cfg.schedule.scan_every == 0 {
            let inc = sensors.drift_increment();
            t_ml_true = t_ml_true.compose(&inc);
        }

        // Sensors observe the current plant state.
        let local_true = t_ml_true.inverse().compose(&plant.pose);
        let measurements = sensors.poll(m, t, &local_true, &plant, cfg.plant_params.wheelbase);
        if cfg.icp_enabled && m % cfg.schedule.scan_every == 0 {
            if let Some(world) = cfg.world {
                latest_scan = Some(sensors.scan(world, &plant.pose));
            }
        }

        // Estimator: advance to t, then fold in this tick's measurements.
        if t > ekf.stamp {
            ekf = ekf_predict(&ekf, t - ekf.stamp, &q_process);
        }
        for mm in &measurements {
            match ekf_update(&ekf, mm) {
                Ok(next) => ekf = next,
                Err(EstimationError::StaleMeasurement { .. }) => {}
                Err(e) => return Err(SimError::Estimation(e)),
            }
        }

        // Map-level correction.
        if cfg.icp_enabled && m > 0 && m % cfg.schedule.icp_every == 0 {
            if let (Some(scan), Some(map)) = (&latest_scan, cfg.nav_map) {
                let init = correction.t_ml.compose(&ekf.pose);
                if let Ok(matched) = icp_scan_to_map(scan, map, init, &icp_cfg) {
                    let raw = MapCorrection::from_match(&matched, &ekf);
                    correction = correction_filter(&correction, &raw, 0.25, 0.3);
                }
            }
        }

        // Control tick.
        if m % cfg.schedule.control_every == 0 {
            let est_pose = compose_map_pose(&correction, &ekf);

            if let Some(obstacle) = &cfg.obstacle {
                manage_detour(
                    &mut active,
                    &mut detour,
                    cfg.traj,
                    obstacle,
                    t,
                    v_ref_splice,
                    cfg,
                )?;
            }

            let k = active.index_at(t);
            let window = active.window(k, horizon);
            let t_solve = Instant::now();
            let outcome = match controller.compute(&est_pose, &window) {
                Ok(o) => o,
                Err(nav_core::control::ControlError::SolverFailure { .. }) => {
                    completed = false;
                    break;
                }
                Err(e) => return Err(SimError::Control(e)),
            };
            let solver_ms = t_solve.elapsed().as_secs_f64() * 1e3;
            cmd = to_ackermann(
                outcome.u,
                cfg.controller_cfg.wheelbase,
                cfg.controller_cfg.v_eps,
                cfg.controller_cfg.delta_max,
            );
            records.push(TickRecord {
                t,
                truth: plant.pose,
                est: est_pose,
                reference: window[0].pose,
                v_est: ekf.v,
                omega_est: ekf.omega,
                cmd_v: outcome.u.v,
                cmd_omega: outcome.u.omega,
                cmd_delta: cmd.delta,
                solver_ms,
            });
        }

        // Collision oracle on the true pose trace.
        if let Some(world) = cfg.world {
            if collides_with_grid(world, plant.pose.x, plant.pose.y, cfg.footprint_radius) {
                collided = true;
            }
        }
        if let Some(obstacle) = &cfg.obstacle {
            let c = obstacle.at(t);
            if (plant.pose.x - c.0).hypot(plant.pose.y - c.1)
                < cfg.footprint_radius + obstacle.radius
            {
                collided = true;
            }
        }

        plant = step_bicycle(&plant, &cmd, micro_dt, &cfg.plant_params);
    }

    let times: Vec<f64> = records.iter().map(|r| r.solver_ms).collect();
    let rmse = spatial_rmse(&records, cfg.traj);
    let goal_reached = cfg.goal.map(|(gx, gy)| {
        records
            .last()
            .map(|r| (r.est.x - gx).hypot(r.est.y - gy) <= cfg.goal_tol)
            .unwrap_or(false)
    });
    let mean = times.iter().sum::<f64>() / times.len().max(1) as f64;
    let summary = RunSummary {
        rmse,
        solver_mean_ms: mean,
        solver_median_ms: percentile(&times, 50.0),
        solver_p95_ms: percentile(&times, 95.0),
        solver_max_ms: times.iter().cloned().fold(0.0, f64::max),
        completed,
        goal_reached,
        collided,
    };
    Ok(RunLog {
        dt: dt_ctrl,
        records,
        summary,
    })
}

/// Root-mean-square distance from the recorded true positions to the
/// nearest point of the reference path polyline.
pub fn spatial_rmse(records: &[TickRecord], reference: &ReferenceTrajectory) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let sum_sq: f64 = records
        .iter()
        .map(|r| {
            let d = reference.distance_to_path(r.truth.x, r.truth.y);
            d * d
        })
        .sum();
    (sum_sq / records.len() as f64).sqrt()
}

/// Keep, rebuild or drop the active detour for the current tick.
///
/// A detour is built when a conflict appears ahead on the original route,
/// held while the robot executes it (rebuilt only if its remaining samples
/// lose clearance against the obstacle's refreshed prediction), and dropped
/// once the robot passes its exit.
fn manage_detour(
    active: &mut ReferenceTrajectory,
    detour: &mut Option<ActiveDetour>,
    original: &ReferenceTrajectory,
    obstacle: &MovingObstacle,
    t: f64,
    v_ref: f64,
    cfg: &LoopConfig,
) -> Result<(), SimError> {
    // Hold the current detour while it is being executed and still clears
    // the obstacle's refreshed prediction (at half the build margin).
    let mut previous: Option<ActiveDetour> = None;
    if let Some(d) = detour.take() {
        if t <= d.exit_t {
            let k = active.index_at(t);
            let exit_index = active.index_at(d.exit_t).min(active.len() - 1);
            let margin = obstacle.radius + 0.5 * cfg.avoidance.clearance;
            let still_safe = k > exit_index
                || active.samples[k..=exit_index].iter().all(|s| {
                    let c = obstacle.at(s.t.max(t));
                    (s.pose.x - c.0).hypot(s.pose.y - c.1) >= margin
                });
            if still_safe {
                *detour = Some(d);
                return Ok(());
            }
            previous = Some(d);
        }
        // Past the exit (or unsafe): restore the global route and rethink.
        *active = original.clone();
    }

    let k_orig = original.index_at(t);
    let obs_now = obstacle.observe(t);
    if let Some(conflict) = detect_conflict(original, k_orig, &[obs_now], &cfg.avoidance) {
        match build_detour(original, &conflict, &cfg.avoidance, cfg.inflated_map) {
            Ok(segment) => {
                let spliced = splice(original, &segment, v_ref, original.dt);
                let shift = spliced.len() as i64 - original.len() as i64;
                let exit_spliced = (segment.exit_index as i64 + shift) as usize;
                let exit_t = exit_spliced as f64 * original.dt;
                *active = spliced.clone();
                *detour = Some(ActiveDetour {
                    trajectory: spliced,
                    exit_t,
                });
            }
            Err(AvoidanceError::Infeasible { .. } | AvoidanceError::BlockedDetour { .. })
                if previous.is_some() =>
            {
                // A rebuild mid-detour can fail transiently; keep flying the
                // old detour rather than aborting.
                let d = previous.take().unwrap();
                *active = d.trajectory.clone();
                *detour = Some(d);
            }
            Err(e) => return Err(SimError::Avoidance(e)),
        }
    }
    Ok(())
}
