//! Command-line driver for the desk-scale navigation experiments.

use clap::{Parser, Subcommand};
use nav_core::control::ControllerConfig;
use nav_core::grid::{inflate, load_grid, load_point_cloud, CellIndex};
use nav_core::planner::{
    generate_reference, path_metrics, prune_collinear, PlanQuery, PlannerRegistry,
};
use nav_sim::experiments::{
    run_end_to_end, run_planning_benchmark, run_tracking_experiment, E2eConfig,
};
use nav_sim::report::emit_report;
use nav_sim::scenario::{ScenarioConfig, TrajectoryKind};
use nav_sim::SimError;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nav-sim",
    about = "Grid planning, MPC trajectory tracking and end-to-end navigation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a path on a grid map between two cells.
    Plan {
        #[arg(long)]
        map: PathBuf,
        /// Start cell as `col,row`.
        #[arg(long)]
        start: String,
        /// Goal cell as `col,row`.
        #[arg(long)]
        goal: String,
        /// Use the baseline planner instead of the turning-aware one.
        #[arg(long)]
        baseline: bool,
        /// Turning penalty in meters of equivalent detour (default: twice
        /// the map resolution).
        #[arg(long)]
        turn_cost: Option<f64>,
        /// Disable the early line-of-sight termination.
        #[arg(long)]
        no_early_exit: bool,
        /// Inflate obstacles by this clearance before planning.
        #[arg(long, default_value_t = 0.0)]
        ds: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run seeded random planning queries and compare both planners.
    BenchPlan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        queries: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-loop trajectory tracking on a benchmark reference.
    Track {
        /// `lemniscate` or `square`.
        #[arg(long)]
        traj: String,
        /// `mpc` or `agmpc`.
        #[arg(long)]
        controller: String,
        /// Reference speed in m/s.
        #[arg(long)]
        speed: f64,
        #[arg(long)]
        seed: u64,
        /// Controller config file (flat `key = value`).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// End-to-end navigation: cloud -> map -> plan -> track with EKF + ICP.
    E2e {
        /// Ground-truth world map (scan synthesis and collision checks).
        #[arg(long)]
        map: PathBuf,
        /// Mapped point cloud used to build the navigation grid.
        #[arg(long)]
        cloud: PathBuf,
        /// Start position as `x,y` meters.
        #[arg(long)]
        start: String,
        /// Goal position as `x,y` meters.
        #[arg(long)]
        goal: String,
        /// `mpc` or `agmpc`.
        #[arg(long)]
        controller: String,
        /// Inject a crossing obstacle timed against the planned route.
        #[arg(long)]
        moving_obstacle: bool,
        #[arg(long)]
        seed: u64,
        /// Controller config file (flat `key = value`).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_pair<T: std::str::FromStr>(text: &str, what: &str) -> Result<(T, T), SimError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(SimError::Config(format!(
            "{what} must be `a,b`, got `{text}`"
        )));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|_| SimError::Config(format!("bad {what} component `{}`", parts[0])))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|_| SimError::Config(format!("bad {what} component `{}`", parts[1])))?;
    Ok((a, b))
}

fn load_controller_cfg(path: &Option<PathBuf>) -> Result<ControllerConfig, SimError> {
    match path {
        Some(p) => ControllerConfig::from_file(p).map_err(SimError::Control),
        None => Ok(ControllerConfig::default()),
    }
}

fn cmd_plan(
    map: PathBuf,
    start: String,
    goal: String,
    baseline: bool,
    turn_cost: Option<f64>,
    no_early_exit: bool,
    ds: f64,
    out: PathBuf,
) -> Result<(), SimError> {
    let grid = load_grid(&map)?;
    let grid = inflate(&grid, ds)?;
    let (sc, sr) = parse_pair::<usize>(&start, "start")?;
    let (gc, gr) = parse_pair::<usize>(&goal, "goal")?;
    let query = PlanQuery::new(CellIndex::new(sc, sr), CellIndex::new(gc, gr))
        .with_turning_cost(turn_cost.unwrap_or(2.0 * grid.resolution()))
        .with_early_termination(!no_early_exit);

    let registry = PlannerRegistry::with_defaults();
    let name = if baseline { "baseline" } else { "improved" };
    let planner = registry
        .get(name)
        .ok_or_else(|| SimError::Config(format!("planner `{name}` not registered")))?;
    let raw = planner.plan(&grid, &query)?;
    let path = if baseline {
        raw
    } else {
        prune_collinear(&grid, &raw)?
    };

    std::fs::create_dir_all(&out)?;
    let mut path_csv = String::from("col,row,x,y\n");
    for (cell, (x, y)) in path.cells.iter().zip(&path.world_points) {
        let _ = writeln!(path_csv, "{},{},{:.8e},{:.8e}", cell.col, cell.row, x, y);
    }
    std::fs::write(out.join("path.csv"), path_csv)?;

    if path.cells.len() >= 2 {
        let m = path_metrics(&path)?;
        let mut metrics_csv = String::from("metric,value\n");
        let _ = writeln!(metrics_csv, "planner,{name}");
        let _ = writeln!(metrics_csv, "length_m,{:.8e}", m.length_m);
        let _ = writeln!(metrics_csv, "total_turning_deg,{:.8e}", m.total_turning_deg);
        let _ = writeln!(metrics_csv, "inflection_count,{}", m.inflection_count);
        let _ = writeln!(metrics_csv, "cost_m,{:.8e}", path.cost);
        std::fs::write(out.join("metrics.csv"), metrics_csv)?;
        println!(
            "{name}: {} waypoints, length {:.2} m, turning {:.1} deg, {} inflections",
            path.cells.len(),
            m.length_m,
            m.total_turning_deg,
            m.inflection_count
        );
        let reference = generate_reference(&path, 1.0, 1.0 / 30.0, 0.5)?;
        std::fs::write(out.join("trajectory.csv"), reference.to_csv())?;
    } else {
        println!("{name}: start equals goal, single-cell path");
    }
    Ok(())
}

fn cmd_bench_plan(map: PathBuf, queries: usize, seed: u64, out: PathBuf) -> Result<(), SimError> {
    let grid = load_grid(&map)?;
    let report = run_planning_benchmark(&grid, queries, seed, 2.0 * grid.resolution())?;
    std::fs::create_dir_all(&out)?;
    let mut csv = String::from(
        "planner,mean_length_m,mean_turning_deg,mean_inflections,mean_time_ms\n",
    );
    for (name, s) in [("baseline", report.baseline), ("improved", report.improved)] {
        let _ = writeln!(
            csv,
            "{name},{:.8e},{:.8e},{:.8e},{:.8e}",
            s.mean_length_m, s.mean_turning_deg, s.mean_inflections, s.mean_time_ms
        );
    }
    std::fs::write(out.join("benchmark.csv"), &csv)?;
    println!("{} queries on {}x{} map", report.queries, grid.width(), grid.height());
    println!("  baseline: length {:.2} m, turning {:.1} deg, {:.2} inflections, {:.2} ms",
        report.baseline.mean_length_m,
        report.baseline.mean_turning_deg,
        report.baseline.mean_inflections,
        report.baseline.mean_time_ms
    );
    println!("  improved: length {:.2} m, turning {:.1} deg, {:.2} inflections, {:.2} ms",
        report.improved.mean_length_m,
        report.improved.mean_turning_deg,
        report.improved.mean_inflections,
        report.improved.mean_time_ms
    );
    Ok(())
}

fn cmd_track(
    traj: String,
    controller: String,
    speed: f64,
    seed: u64,
    config: Option<PathBuf>,
    out: PathBuf,
) -> Result<(), SimError> {
    let kind = match traj.as_str() {
        "lemniscate" => TrajectoryKind::Lemniscate { half_width: 4.0 },
        "square" => TrajectoryKind::Square {
            side: 6.0,
            corner_radius: 0.8,
        },
        other => {
            return Err(SimError::Config(format!(
                "unknown trajectory `{other}` (use lemniscate|square)"
            )))
        }
    };
    let mut sc = ScenarioConfig::new(kind, &controller, speed, seed);
    sc.controller_cfg = load_controller_cfg(&config)?;
    let log = run_tracking_experiment(&sc)?;
    emit_report(&log, &out)?;
    let reference =
        nav_sim::experiments::build_reference(&kind, speed, sc.controller_cfg.dt)?;
    std::fs::write(out.as_path().join("reference.csv"), reference.to_csv())?;
    println!(
        "{controller} on {traj} at {speed} m/s: rmse {:.4} m, solver mean {:.2} ms (p95 {:.2}), {}",
        log.summary.rmse,
        log.summary.solver_mean_ms,
        log.summary.solver_p95_ms,
        if log.summary.completed { "completed" } else { "aborted" }
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_e2e(
    map: PathBuf,
    cloud: PathBuf,
    start: String,
    goal: String,
    controller: String,
    moving_obstacle: bool,
    seed: u64,
    config: Option<PathBuf>,
    out: PathBuf,
) -> Result<(), SimError> {
    let world = load_grid(&map)?;
    let cloud = load_point_cloud(&cloud)?;
    let start = parse_pair::<f64>(&start, "start")?;
    let goal = parse_pair::<f64>(&goal, "goal")?;
    let mut cfg = E2eConfig::new(world, cloud, start, goal, &controller, seed);
    cfg.controller_cfg = load_controller_cfg(&config)?;
    cfg.auto_obstacle = moving_obstacle;
    let outcome = run_end_to_end(&cfg)?;
    emit_report(&outcome.log, &out)?;
    std::fs::write(out.as_path().join("reference.csv"), outcome.reference.to_csv())?;
    nav_core::grid::save_grid(&outcome.nav_map, out.as_path().join("nav_map.grid"))?;
    let sm = &outcome.log.summary;
    println!(
        "e2e {controller}: goal_reached {} collided {} rmse {:.3} m",
        sm.goal_reached.unwrap_or(false),
        sm.collided,
        sm.rmse
    );
    if sm.goal_reached == Some(false) || sm.collided {
        return Err(SimError::Config("navigation failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan {
            map,
            start,
            goal,
            baseline,
            turn_cost,
            no_early_exit,
            ds,
            out,
        } => cmd_plan(map, start, goal, baseline, turn_cost, no_early_exit, ds, out),
        Command::BenchPlan {
            map,
            queries,
            seed,
            out,
        } => cmd_bench_plan(map, queries, seed, out),
        Command::Track {
            traj,
            controller,
            speed,
            seed,
            config,
            out,
        } => cmd_track(traj, controller, speed, seed, config, out),
        Command::E2e {
            map,
            cloud,
            start,
            goal,
            controller,
            moving_obstacle,
            seed,
            config,
            out,
        } => cmd_e2e(
            map,
            cloud,
            start,
            goal,
            controller,
            moving_obstacle,
            seed,
            config,
            out,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
