//! Grid path planning.
//!
//! Two planners live behind the [`PathPlanner`] trait and are selected by
//! name through the [`PlannerRegistry`]:
//!
//! - `"baseline"`: classical 8-connected A* with a Euclidean heuristic.
//! - `"improved"`: A* over (cell, incoming-direction) states with a turning
//!   penalty, optional early line-of-sight termination, and (via
//!   [`prune_collinear`]) collinear/shortcut waypoint removal.
//!
//! Both planners forbid corner-cutting diagonals: a diagonal step is only
//! admitted when both adjacent orthogonal cells are free, which keeps every
//! raw path segment consistent with the supercover line-of-sight test.

mod astar;
mod smooth;

pub use astar::{cost_value, plan_baseline_astar, plan_improved_astar};
pub use smooth::{generate_reference, PlanarCurve, Segment};

use crate::grid::{line_of_sight, CellIndex, GridError, OccupancyGrid};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("no path from ({0}, {1}) to ({2}, {3})", .start.col, .start.row, .goal.col, .goal.row)]
    Unreachable { start: CellIndex, goal: CellIndex },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// A start/goal pair plus the knobs of the improved planner. The baseline
/// planner ignores `turning_cost` and `early_termination`.
#[derive(Clone, Copy, Debug)]
pub struct PlanQuery {
    pub start: CellIndex,
    pub goal: CellIndex,
    /// Extra cost (in meters of equivalent detour) charged whenever the
    /// expansion direction changes.
    pub turning_cost: f64,
    /// Close the path with a direct segment as soon as an expanded node can
    /// see the goal.
    pub early_termination: bool,
}

impl PlanQuery {
    pub fn new(start: CellIndex, goal: CellIndex) -> Self {
        PlanQuery {
            start,
            goal,
            turning_cost: 0.0,
            early_termination: false,
        }
    }

    pub fn with_turning_cost(mut self, c: f64) -> Self {
        self.turning_cost = c;
        self
    }

    pub fn with_early_termination(mut self, on: bool) -> Self {
        self.early_termination = on;
        self
    }
}

/// An ordered cell path together with the matching world points (cell
/// centers) and its accumulated cost in meters.
#[derive(Clone, Debug)]
pub struct PlannedPath {
    pub cells: Vec<CellIndex>,
    pub world_points: Vec<(f64, f64)>,
    pub cost: f64,
}

impl PlannedPath {
    pub fn from_cells(grid: &OccupancyGrid, cells: Vec<CellIndex>, cost: f64) -> Self {
        let world_points = cells.iter().map(|&c| grid.cell_to_world(c)).collect();
        PlannedPath {
            cells,
            world_points,
            cost,
        }
    }

    /// Check that consecutive waypoints are mutually visible (supercover
    /// line free), which subsumes the 8-neighbor case.
    pub fn is_collision_free(&self, grid: &OccupancyGrid) -> Result<bool, GridError> {
        if self.cells.len() == 1 {
            return Ok(grid.is_free(self.cells[0]));
        }
        for pair in self.cells.windows(2) {
            if !line_of_sight(grid, pair[0], pair[1])? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Path quality metrics: length, total turning, and inflection count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathMetrics {
    pub length_m: f64,
    pub total_turning_deg: f64,
    pub inflection_count: usize,
}

/// Angle changes below this are treated as straight-through.
const TURN_TOLERANCE_RAD: f64 = 1e-9;

/// Length, total absolute turning angle (degrees), and the number of
/// interior waypoints with a nonzero exterior angle.
pub fn path_metrics(path: &PlannedPath) -> Result<PathMetrics, PlanError> {
    let pts = &path.world_points;
    if pts.len() < 2 {
        return Err(PlanError::InvalidArgument(
            "path metrics require at least 2 waypoints".into(),
        ));
    }
    let mut length = 0.0;
    for pair in pts.windows(2) {
        length += ((pair[1].0 - pair[0].0).powi(2) + (pair[1].1 - pair[0].1).powi(2)).sqrt();
    }
    let mut turning = 0.0;
    let mut inflections = 0;
    for w in pts.windows(3) {
        let h1 = (w[1].1 - w[0].1).atan2(w[1].0 - w[0].0);
        let h2 = (w[2].1 - w[1].1).atan2(w[2].0 - w[1].0);
        let ext = crate::se2::normalize_angle(h2 - h1).abs();
        if ext > TURN_TOLERANCE_RAD {
            turning += ext;
            inflections += 1;
        }
    }
    Ok(PathMetrics {
        length_m: length,
        total_turning_deg: turning.to_degrees(),
        inflection_count: inflections,
    })
}

/// Remove redundant waypoints: first drop interior nodes where consecutive
/// cell steps are exactly collinear, then repeatedly drop any interior node
/// whose neighbors see each other, until a fixed point. Endpoints are kept.
pub fn prune_collinear(grid: &OccupancyGrid, path: &PlannedPath) -> Result<PlannedPath, PlanError> {
    let mut cells: Vec<CellIndex> = Vec::with_capacity(path.cells.len());
    for &c in &path.cells {
        if cells.last() != Some(&c) {
            cells.push(c);
        }
    }

    // Exact collinearity on integer cell deltas.
    let mut kept: Vec<CellIndex> = Vec::with_capacity(cells.len());
    for &c in &cells {
        while kept.len() >= 2 {
            let a = kept[kept.len() - 2];
            let b = kept[kept.len() - 1];
            let d1 = (b.col as i64 - a.col as i64, b.row as i64 - a.row as i64);
            let d2 = (c.col as i64 - b.col as i64, c.row as i64 - b.row as i64);
            let cross = d1.0 * d2.1 - d1.1 * d2.0;
            let dot = d1.0 * d2.0 + d1.1 * d2.1;
            if cross == 0 && dot > 0 {
                kept.pop();
            } else {
                break;
            }
        }
        kept.push(c);
    }

    // Shortcut pass: drop nodes whose neighbors are mutually visible.
    let mut changed = true;
    while changed {
        changed = false;
        let mut i = 1;
        while i + 1 < kept.len() {
            if line_of_sight(grid, kept[i - 1], kept[i + 1])? {
                kept.remove(i);
                changed = true;
            } else {
                i += 1;
            }
        }
    }

    let cost = polyline_length_m(grid, &kept);
    Ok(PlannedPath::from_cells(grid, kept, cost))
}

fn polyline_length_m(grid: &OccupancyGrid, cells: &[CellIndex]) -> f64 {
    let p = grid.resolution();
    cells
        .windows(2)
        .map(|w| {
            let dc = w[1].col as f64 - w[0].col as f64;
            let dr = w[1].row as f64 - w[0].row as f64;
            (dc * dc + dr * dr).sqrt() * p
        })
        .sum()
}

/// A planning algorithm selectable at runtime.
pub trait PathPlanner: Send + Sync {
    fn name(&self) -> &'static str;
    fn plan(&self, grid: &OccupancyGrid, query: &PlanQuery) -> Result<PlannedPath, PlanError>;
}

/// Classical 8-connected A*.
pub struct BaselineAstar;

impl PathPlanner for BaselineAstar {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn plan(&self, grid: &OccupancyGrid, query: &PlanQuery) -> Result<PlannedPath, PlanError> {
        plan_baseline_astar(grid, query)
    }
}

/// Turning-aware A* with early line-of-sight termination.
pub struct ImprovedAstar;

impl PathPlanner for ImprovedAstar {
    fn name(&self) -> &'static str {
        "improved"
    }

    fn plan(&self, grid: &OccupancyGrid, query: &PlanQuery) -> Result<PlannedPath, PlanError> {
        plan_improved_astar(grid, query)
    }
}

/// Name-keyed registry of planner implementations.
pub struct PlannerRegistry {
    entries: BTreeMap<&'static str, Box<dyn PathPlanner>>,
}

impl PlannerRegistry {
    pub fn new() -> Self {
        PlannerRegistry {
            entries: BTreeMap::new(),
        }
    }

    /// Both built-in planners registered under their names.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register(Box::new(BaselineAstar));
        r.register(Box::new(ImprovedAstar));
        r
    }

    pub fn register(&mut self, planner: Box<dyn PathPlanner>) {
        self.entries.insert(planner.name(), planner);
    }

    pub fn get(&self, name: &str) -> Option<&dyn PathPlanner> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

impl Default for PlannerRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
