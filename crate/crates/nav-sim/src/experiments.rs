//! The three experiment protocols: tracking benchmark, planning benchmark,
//! and end-to-end navigation.

use crate::plant::PlantParams;
use crate::reference::{lemniscate_ref, square_ref};
use crate::runner::{run_closed_loop, LoopConfig, MovingObstacle};
use crate::scenario::{RunLog, ScenarioConfig, TrajectoryKind};
use crate::sensors::NoiseConfig;
use crate::SimError;
use nav_core::avoidance::AvoidanceConfig;
use nav_core::control::ControllerConfig;
use nav_core::grid::{height_filter, inflate, project_to_grid, CellIndex, OccupancyGrid, PointCloud3};
use nav_core::planner::{
    generate_reference, path_metrics, plan_baseline_astar, plan_improved_astar, prune_collinear,
    PlanQuery,
};
use nav_core::se2::Pose2;
use nav_core::trajectory::ReferenceTrajectory;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::time::Instant;

/// Closed-loop trajectory tracking at 30 Hz: estimator feedback, the chosen
/// controller, Ackermann conversion, and the lagged bicycle plant.
pub fn run_tracking_experiment(sc: &ScenarioConfig) -> Result<RunLog, SimError> {
    if sc.v_ref > sc.controller_cfg.v_max {
        return Err(SimError::Config(format!(
            "v_ref {} exceeds v_max {}",
            sc.v_ref, sc.controller_cfg.v_max
        )));
    }
    let traj = build_reference(&sc.trajectory, sc.v_ref, sc.controller_cfg.dt)?;
    let cfg = LoopConfig::tracking(
        &traj,
        &sc.controller,
        sc.controller_cfg.clone(),
        sc.plant,
        sc.noise,
        sc.seed,
    );
    run_closed_loop(&cfg)
}

pub fn build_reference(
    kind: &TrajectoryKind,
    v_ref: f64,
    dt: f64,
) -> Result<ReferenceTrajectory, SimError> {
    match *kind {
        TrajectoryKind::Lemniscate { half_width } => {
            lemniscate_ref(half_width, v_ref, dt).map_err(SimError::Reference)
        }
        TrajectoryKind::Square { side, corner_radius } => {
            square_ref(side, corner_radius, v_ref, dt).map_err(SimError::Reference)
        }
    }
}

/// Per-planner aggregate of the planning benchmark.
#[derive(Clone, Copy, Debug)]
pub struct PlannerStats {
    pub mean_length_m: f64,
    pub mean_turning_deg: f64,
    pub mean_inflections: f64,
    pub mean_time_ms: f64,
}

#[derive(Clone, Debug)]
pub struct PlanBenchReport {
    pub queries: usize,
    pub baseline: PlannerStats,
    pub improved: PlannerStats,
}

/// 8-connected reachability (same adjacency as the planners).
fn reachable(grid: &OccupancyGrid, start: CellIndex, goal: CellIndex) -> bool {
    if !grid.is_free(start) || !grid.is_free(goal) {
        return false;
    }
    let mut seen = vec![false; grid.width() * grid.height()];
    let id = |c: CellIndex| c.row * grid.width() + c.col;
    let mut queue = VecDeque::new();
    seen[id(start)] = true;
    queue.push_back(start);
    while let Some(c) = queue.pop_front() {
        if c == goal {
            return true;
        }
        for (dc, dr) in [
            (1i64, 0i64),
            (1, 1),
            (0, 1),
            (-1, 1),
            (-1, 0),
            (-1, -1),
            (0, -1),
            (1, -1),
        ] {
            let col = c.col as i64 + dc;
            let row = c.row as i64 + dr;
            if col < 0 || row < 0 || col >= grid.width() as i64 || row >= grid.height() as i64 {
                continue;
            }
            let next = CellIndex::new(col as usize, row as usize);
            if !grid.is_free(next) || seen[id(next)] {
                continue;
            }
            if dc != 0 && dr != 0 {
                if !grid.is_free(CellIndex::new(c.col, next.row))
                    || !grid.is_free(CellIndex::new(next.col, c.row))
                {
                    continue;
                }
            }
            seen[id(next)] = true;
            queue.push_back(next);
        }
    }
    false
}

/// Seeded random start-goal queries on one map, run through both planners.
/// Baseline metrics cover its raw grid path; improved metrics cover the
/// pruned turning-aware path with early termination, matching how each
/// would be deployed.
pub fn run_planning_benchmark(
    grid: &OccupancyGrid,
    n_queries: usize,
    seed: u64,
    turning_cost: f64,
) -> Result<PlanBenchReport, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_separation = (grid.width().min(grid.height()) / 2) as f64;
    let mut acc_base = (0.0, 0.0, 0.0, 0.0);
    let mut acc_improved = (0.0, 0.0, 0.0, 0.0);
    let mut done = 0;
    let mut attempts = 0;
    while done < n_queries {
        attempts += 1;
        if attempts > 200 * n_queries {
            return Err(SimError::Config(
                "could not sample enough reachable query pairs".into(),
            ));
        }
        let start = CellIndex::new(
            rng.gen_range(0..grid.width()),
            rng.gen_range(0..grid.height()),
        );
        let goal = CellIndex::new(
            rng.gen_range(0..grid.width()),
            rng.gen_range(0..grid.height()),
        );
        let sep = ((start.col as f64 - goal.col as f64).powi(2)
            + (start.row as f64 - goal.row as f64).powi(2))
        .sqrt();
        if sep < min_separation || !reachable(grid, start, goal) {
            continue;
        }

        let t0 = Instant::now();
        let base_path = plan_baseline_astar(grid, &PlanQuery::new(start, goal))
            .map_err(SimError::Plan)?;
        let base_ms = t0.elapsed().as_secs_f64() * 1e3;
        debug_assert!(base_path.is_collision_free(grid).unwrap_or(false));

        let t1 = Instant::now();
        let improved_raw = plan_improved_astar(
            grid,
            &PlanQuery::new(start, goal)
                .with_turning_cost(turning_cost)
                .with_early_termination(true),
        )
        .map_err(SimError::Plan)?;
        let improved_path = prune_collinear(grid, &improved_raw).map_err(SimError::Plan)?;
        let improved_ms = t1.elapsed().as_secs_f64() * 1e3;
        debug_assert!(improved_path.is_collision_free(grid).unwrap_or(false));

        let mb = path_metrics(&base_path).map_err(SimError::Plan)?;
        let mi = path_metrics(&improved_path).map_err(SimError::Plan)?;
        acc_base.0 += mb.length_m;
        acc_base.1 += mb.total_turning_deg;
        acc_base.2 += mb.inflection_count as f64;
        acc_base.3 += base_ms;
        acc_improved.0 += mi.length_m;
        acc_improved.1 += mi.total_turning_deg;
        acc_improved.2 += mi.inflection_count as f64;
        acc_improved.3 += improved_ms;
        done += 1;
    }

    let n = done as f64;
    let stats = |acc: (f64, f64, f64, f64)| PlannerStats {
        mean_length_m: acc.0 / n,
        mean_turning_deg: acc.1 / n,
        mean_inflections: acc.2 / n,
        mean_time_ms: acc.3 / n,
    };
    Ok(PlanBenchReport {
        queries: done,
        baseline: stats(acc_base),
        improved: stats(acc_improved),
    })
}

/// End-to-end configuration: perception inputs, pipeline parameters, and
/// the tracking scenario knobs.
#[derive(Clone)]
pub struct E2eConfig {
    pub world: OccupancyGrid,
    pub cloud: PointCloud3,
    pub start: (f64, f64),
    pub goal: (f64, f64),
    pub controller: String,
    pub controller_cfg: ControllerConfig,
    pub plant: PlantParams,
    pub noise: NoiseConfig,
    pub seed: u64,
    pub v_ref: f64,
    pub z_band: (f64, f64),
    pub min_hits: usize,
    pub projection_resolution: f64,
    /// Safety clearance used for inflation and detour sizing.
    pub d_s: f64,
    pub corner_radius: f64,
    pub turning_cost_factor: f64,
    pub goal_tol: f64,
    pub footprint_radius: f64,
    pub obstacle: Option<MovingObstacle>,
    /// Synthesize a crossing obstacle timed against the planned route.
    pub auto_obstacle: bool,
}

impl E2eConfig {
    pub fn new(
        world: OccupancyGrid,
        cloud: PointCloud3,
        start: (f64, f64),
        goal: (f64, f64),
        controller: &str,
        seed: u64,
    ) -> Self {
        let mut noise = NoiseConfig::default();
        noise.drift_xy = 0.01;
        noise.drift_theta = 0.004;
        E2eConfig {
            world,
            cloud,
            start,
            goal,
            controller: controller.to_string(),
            controller_cfg: ControllerConfig::default(),
            plant: PlantParams::default(),
            noise,
            seed,
            v_ref: 1.0,
            z_band: (0.1, 2.0),
            min_hits: 1,
            projection_resolution: 0.1,
            d_s: 0.5,
            corner_radius: 0.5,
            turning_cost_factor: 2.0,
            goal_tol: 0.5,
            footprint_radius: 0.3,
            obstacle: None,
            auto_obstacle: false,
        }
    }
}

/// A slow obstacle that crosses the reference path at its midpoint exactly
/// when the robot is due there, forcing the avoidance layer to act.
pub fn crossing_obstacle(reference: &ReferenceTrajectory) -> MovingObstacle {
    let mid = reference.len() / 2;
    let sample = reference.samples[mid];
    let t_mid = sample.t.max(1.0);
    let heading = sample.pose.theta();
    let normal = (-heading.sin(), heading.cos());
    let offset = 3.5;
    MovingObstacle {
        center0: (
            sample.pose.x + normal.0 * offset,
            sample.pose.y + normal.1 * offset,
        ),
        velocity: (-normal.0 * offset / t_mid, -normal.1 * offset / t_mid),
        radius: 0.35,
    }
}

/// Artifacts of an end-to-end run beyond the log itself.
pub struct E2eOutcome {
    pub log: RunLog,
    pub nav_map: OccupancyGrid,
    pub inflated_map: OccupancyGrid,
    pub reference: ReferenceTrajectory,
}

/// The full pipeline: height filter, projection, inflation, turning-aware
/// planning, reference generation, then closed-loop tracking with the EKF,
/// periodic scan-to-map corrections, and optional obstacle avoidance.
pub fn run_end_to_end(cfg: &E2eConfig) -> Result<E2eOutcome, SimError> {
    let filtered = height_filter(&cfg.cloud, cfg.z_band.0, cfg.z_band.1).map_err(SimError::Grid)?;
    let nav_map = project_to_grid(
        &filtered,
        cfg.projection_resolution,
        &Pose2::identity(),
        cfg.min_hits,
    )
    .map_err(SimError::Grid)?;
    let inflated = inflate(&nav_map, cfg.d_s).map_err(SimError::Grid)?;

    let start_cell = inflated
        .world_to_cell(cfg.start.0, cfg.start.1)
        .map_err(SimError::Grid)?;
    let goal_cell = inflated
        .world_to_cell(cfg.goal.0, cfg.goal.1)
        .map_err(SimError::Grid)?;
    let query = PlanQuery::new(start_cell, goal_cell)
        .with_turning_cost(cfg.turning_cost_factor * inflated.resolution())
        .with_early_termination(true);
    let raw_path = plan_improved_astar(&inflated, &query).map_err(SimError::Plan)?;
    let path = prune_collinear(&inflated, &raw_path).map_err(SimError::Plan)?;
    let reference = generate_reference(&path, cfg.v_ref, cfg.controller_cfg.dt, cfg.corner_radius)
        .map_err(SimError::Plan)?;

    let obstacle = cfg
        .obstacle
        .or_else(|| cfg.auto_obstacle.then(|| crossing_obstacle(&reference)));
    let avoidance = AvoidanceConfig {
        safety_margin: cfg.d_s,
        ..AvoidanceConfig::default()
    };
    let loop_cfg = LoopConfig {
        traj: &reference,
        controller_name: &cfg.controller,
        controller_cfg: cfg.controller_cfg.clone(),
        plant_params: cfg.plant,
        noise: cfg.noise,
        schedule: crate::sensors::Schedule::default(),
        seed: cfg.seed,
        duration: reference.duration() + 2.0,
        world: Some(&cfg.world),
        nav_map: Some(&nav_map),
        inflated_map: Some(&inflated),
        icp_enabled: true,
        obstacle,
        avoidance,
        footprint_radius: cfg.footprint_radius,
        goal: Some(cfg.goal),
        goal_tol: cfg.goal_tol,
        start_at_speed: false,
    };
    let log = run_closed_loop(&loop_cfg)?;
    Ok(E2eOutcome {
        log,
        nav_map,
        inflated_map: inflated,
        reference,
    })
}
