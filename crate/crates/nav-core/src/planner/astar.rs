//! Baseline and turning-aware A* over 8-connected occupancy grids.
//!
//! Path costs are accumulated as exact integer counts of straight steps,
//! diagonal steps, and turns, and only evaluated to `f64` through a single
//! canonical expression ([`cost_value`]). Two paths with the same step
//! counts therefore always compare exactly equal, which lets tests assert
//! exact cost agreement against independent Dijkstra oracles.

use super::{PlanError, PlanQuery, PlannedPath};
use crate::grid::{line_of_sight, CellIndex, OccupancyGrid};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

/// The 8 neighbor directions. Diagonal steps are only admitted when both
/// adjacent orthogonal cells are free (no corner cutting).
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Sentinel for "no incoming direction" at the start node.
const NO_DIR: u8 = 8;

/// Canonical evaluation of an exact step-count cost. Everyone who compares
/// path costs (planners and test oracles alike) must go through this
/// expression so equal counts evaluate to bit-identical values.
pub fn cost_value(straight: u32, diag: u32, turns: u32, resolution: f64, turn_cost: f64) -> f64 {
    (straight as f64) * resolution + (diag as f64) * (SQRT_2 * resolution) + (turns as f64) * turn_cost
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct StepCount {
    straight: u32,
    diag: u32,
    turns: u32,
}

impl StepCount {
    fn value(&self, resolution: f64, turn_cost: f64) -> f64 {
        cost_value(self.straight, self.diag, self.turns, resolution, turn_cost)
    }
}

/// Min-heap entry. Ties break on lower heuristic first, then lower
/// row-major cell index, then direction, for deterministic expansions.
#[derive(Clone, Copy, Debug)]
struct OpenEntry {
    f: f64,
    h: f64,
    cell: usize,
    dir: u8,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest first.
        other
            .f
            .partial_cmp(&self.f)
            .unwrap()
            .then(other.h.partial_cmp(&self.h).unwrap())
            .then(other.cell.cmp(&self.cell))
            .then(other.dir.cmp(&self.dir))
    }
}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Workspace<'g> {
    grid: &'g OccupancyGrid,
    width: usize,
    goal: CellIndex,
}

impl<'g> Workspace<'g> {
    fn cell_id(&self, c: CellIndex) -> usize {
        c.row * self.width + c.col
    }

    fn cell_of(&self, id: usize) -> CellIndex {
        CellIndex::new(id % self.width, id / self.width)
    }

    /// Euclidean heuristic in meters, deflated by a relative margin so it
    /// stays strictly consistent under floating-point rounding.
    fn heuristic(&self, c: CellIndex) -> f64 {
        let dc = c.col as f64 - self.goal.col as f64;
        let dr = c.row as f64 - self.goal.row as f64;
        (dc * dc + dr * dr).sqrt() * self.grid.resolution() * (1.0 - 1e-12)
    }

    fn step(&self, from: CellIndex, dir: usize) -> Option<CellIndex> {
        let (dc, dr) = DIRS[dir];
        let col = from.col as i64 + dc;
        let row = from.row as i64 + dr;
        if col < 0 || row < 0 {
            return None;
        }
        let next = CellIndex::new(col as usize, row as usize);
        if !self.grid.is_free(next) {
            return None;
        }
        if dc != 0 && dr != 0 {
            // No corner cutting through a diagonal gap.
            let side_a = CellIndex::new(from.col, next.row);
            let side_b = CellIndex::new(next.col, from.row);
            if !self.grid.is_free(side_a) || !self.grid.is_free(side_b) {
                return None;
            }
        }
        Some(next)
    }
}

fn validate_query(grid: &OccupancyGrid, q: &PlanQuery) -> Result<(), PlanError> {
    for (label, c) in [("start", q.start), ("goal", q.goal)] {
        if !grid.contains(c) {
            return Err(PlanError::InvalidQuery(format!(
                "{label} ({}, {}) is out of bounds",
                c.col, c.row
            )));
        }
        if !grid.is_free(c) {
            return Err(PlanError::InvalidQuery(format!(
                "{label} ({}, {}) is not free",
                c.col, c.row
            )));
        }
    }
    if q.turning_cost < 0.0 || !q.turning_cost.is_finite() {
        return Err(PlanError::InvalidQuery(format!(
            "turning cost must be non-negative, got {}",
            q.turning_cost
        )));
    }
    Ok(())
}

/// Classical A*: minimal-cost 8-connected path under Euclidean step costs
/// and a Euclidean heuristic.
pub fn plan_baseline_astar(grid: &OccupancyGrid, q: &PlanQuery) -> Result<PlannedPath, PlanError> {
    validate_query(grid, q)?;
    if q.start == q.goal {
        return Ok(PlannedPath::from_cells(grid, vec![q.start], 0.0));
    }

    let ws = Workspace {
        grid,
        width: grid.width(),
        goal: q.goal,
    };
    let n = grid.width() * grid.height();
    let p = grid.resolution();
    let mut g_count: Vec<Option<StepCount>> = vec![None; n];
    let mut parent: Vec<usize> = vec![usize::MAX; n];
    let mut open = BinaryHeap::new();

    let start_id = ws.cell_id(q.start);
    g_count[start_id] = Some(StepCount::default());
    open.push(OpenEntry {
        f: ws.heuristic(q.start),
        h: ws.heuristic(q.start),
        cell: start_id,
        dir: 0,
    });

    while let Some(entry) = open.pop() {
        let count = g_count[entry.cell].unwrap();
        let g = count.value(p, 0.0);
        if entry.f > g + entry.h + 1e-12 {
            continue; // stale
        }
        let cell = ws.cell_of(entry.cell);
        if cell == q.goal {
            let cells = reconstruct(&parent, entry.cell, &ws);
            return Ok(PlannedPath::from_cells(grid, cells, g));
        }
        for dir in 0..8 {
            let Some(next) = ws.step(cell, dir) else {
                continue;
            };
            let mut cand = count;
            if DIRS[dir].0 != 0 && DIRS[dir].1 != 0 {
                cand.diag += 1;
            } else {
                cand.straight += 1;
            }
            let next_id = ws.cell_id(next);
            let cand_g = cand.value(p, 0.0);
            let better = match g_count[next_id] {
                None => true,
                Some(old) => cand_g < old.value(p, 0.0),
            };
            if better {
                g_count[next_id] = Some(cand);
                parent[next_id] = entry.cell;
                let h = ws.heuristic(next);
                open.push(OpenEntry {
                    f: cand_g + h,
                    h,
                    cell: next_id,
                    dir: 0,
                });
            }
        }
    }

    Err(PlanError::Unreachable {
        start: q.start,
        goal: q.goal,
    })
}

fn reconstruct(parent: &[usize], mut id: usize, ws: &Workspace) -> Vec<CellIndex> {
    let mut cells = vec![ws.cell_of(id)];
    while parent[id] != usize::MAX {
        id = parent[id];
        cells.push(ws.cell_of(id));
    }
    cells.reverse();
    cells
}

/// Turning-aware A* over (cell, incoming-direction) states. The accumulated
/// cost gains `turning_cost` whenever the expansion direction differs from
/// the previous one; with `early_termination` the search closes the path
/// with a direct segment as soon as a popped node can see the goal.
pub fn plan_improved_astar(grid: &OccupancyGrid, q: &PlanQuery) -> Result<PlannedPath, PlanError> {
    validate_query(grid, q)?;
    if q.start == q.goal {
        return Ok(PlannedPath::from_cells(grid, vec![q.start], 0.0));
    }

    let ws = Workspace {
        grid,
        width: grid.width(),
        goal: q.goal,
    };
    let n_cells = grid.width() * grid.height();
    let p = grid.resolution();
    let c_turn = q.turning_cost;
    // State id = cell * 9 + dir, dir 8 = "no incoming direction" (start).
    let n_states = n_cells * 9;
    let mut g_count: Vec<Option<StepCount>> = vec![None; n_states];
    let mut parent: Vec<usize> = vec![usize::MAX; n_states];
    let mut los_cache: Vec<Option<bool>> = vec![None; n_cells];
    let mut open = BinaryHeap::new();

    let start_state = ws.cell_id(q.start) * 9 + NO_DIR as usize;
    g_count[start_state] = Some(StepCount::default());
    open.push(OpenEntry {
        f: ws.heuristic(q.start),
        h: ws.heuristic(q.start),
        cell: start_state,
        dir: NO_DIR,
    });

    while let Some(entry) = open.pop() {
        let state = entry.cell;
        let count = g_count[state].unwrap();
        let g = count.value(p, c_turn);
        if entry.f > g + entry.h + 1e-12 {
            continue;
        }
        let cell = ws.cell_of(state / 9);
        let dir_in = (state % 9) as u8;

        if cell == q.goal {
            let cells = reconstruct_states(&parent, state, &ws);
            return Ok(PlannedPath::from_cells(grid, cells, g));
        }

        if q.early_termination {
            let visible = *los_cache[state / 9]
                .get_or_insert_with(|| line_of_sight(grid, cell, q.goal).unwrap_or(false));
            if visible {
                let mut cells = reconstruct_states(&parent, state, &ws);
                cells.push(q.goal);
                let dc = q.goal.col as f64 - cell.col as f64;
                let dr = q.goal.row as f64 - cell.row as f64;
                let direct = (dc * dc + dr * dr).sqrt() * p;
                return Ok(PlannedPath::from_cells(grid, cells, g + direct));
            }
        }

        for dir in 0..8u8 {
            let Some(next) = ws.step(cell, dir as usize) else {
                continue;
            };
            let mut cand = count;
            if DIRS[dir as usize].0 != 0 && DIRS[dir as usize].1 != 0 {
                cand.diag += 1;
            } else {
                cand.straight += 1;
            }
            if dir_in != NO_DIR && dir != dir_in {
                cand.turns += 1;
            }
            let next_state = ws.cell_id(next) * 9 + dir as usize;
            let cand_g = cand.value(p, c_turn);
            let better = match g_count[next_state] {
                None => true,
                Some(old) => cand_g < old.value(p, c_turn),
            };
            if better {
                g_count[next_state] = Some(cand);
                parent[next_state] = state;
                let h = ws.heuristic(next);
                open.push(OpenEntry {
                    f: cand_g + h,
                    h,
                    cell: next_state,
                    dir,
                });
            }
        }
    }

    Err(PlanError::Unreachable {
        start: q.start,
        goal: q.goal,
    })
}

fn reconstruct_states(parent: &[usize], mut state: usize, ws: &Workspace) -> Vec<CellIndex> {
    let mut cells = vec![ws.cell_of(state / 9)];
    while parent[state] != usize::MAX {
        state = parent[state];
        cells.push(ws.cell_of(state / 9));
    }
    cells.reverse();
    cells
}
