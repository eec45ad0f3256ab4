//! Independent shortest-path oracles for the grid planners.
//!
//! Both oracles are plain Dijkstra implementations with their own heaps and
//! relaxation logic; they share only `cost_value`, the canonical evaluator
//! that turns exact step counts into comparable floats, so cost agreement
//! can be asserted exactly.

use nav_core::grid::{line_of_sight, Cell, CellIndex, OccupancyGrid};
use nav_core::planner::{
    cost_value, path_metrics, plan_baseline_astar, plan_improved_astar, prune_collinear,
    PlanQuery, PlannedPath,
};
use nav_core::se2::Pose2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

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

#[derive(Clone, Copy, PartialEq, Eq, Default)]
struct Count {
    straight: u32,
    diag: u32,
    turns: u32,
}

impl Count {
    fn value(&self, p: f64, c: f64) -> f64 {
        cost_value(self.straight, self.diag, self.turns, p, c)
    }
}

struct HeapItem {
    cost: f64,
    state: usize,
    count: Count,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.state == other.state
    }
}
impl Eq for HeapItem {}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap()
            .then(other.state.cmp(&self.state))
    }
}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn step_allowed(grid: &OccupancyGrid, from: CellIndex, dir: usize) -> Option<CellIndex> {
    let (dc, dr) = DIRS[dir];
    let col = from.col as i64 + dc;
    let row = from.row as i64 + dr;
    if col < 0 || row < 0 {
        return None;
    }
    let next = CellIndex::new(col as usize, row as usize);
    if !grid.is_free(next) {
        return None;
    }
    if dc != 0 && dr != 0 {
        if !grid.is_free(CellIndex::new(from.col, next.row))
            || !grid.is_free(CellIndex::new(next.col, from.row))
        {
            return None;
        }
    }
    Some(next)
}

/// Dijkstra over plain cells (no turning cost). Returns the exact optimal
/// cost value, or None when unreachable.
fn dijkstra_cells(grid: &OccupancyGrid, start: CellIndex, goal: CellIndex) -> Option<f64> {
    let p = grid.resolution();
    let n = grid.width() * grid.height();
    let id = |c: CellIndex| c.row * grid.width() + c.col;
    let mut best: Vec<Option<Count>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    best[id(start)] = Some(Count::default());
    heap.push(HeapItem {
        cost: 0.0,
        state: id(start),
        count: Count::default(),
    });
    while let Some(item) = heap.pop() {
        let cell = CellIndex::new(item.state % grid.width(), item.state / grid.width());
        let settled = best[item.state].unwrap();
        if item.cost > settled.value(p, 0.0) {
            continue;
        }
        if cell == goal {
            return Some(item.cost);
        }
        for dir in 0..8 {
            let Some(next) = step_allowed(grid, cell, dir) else {
                continue;
            };
            let mut cand = item.count;
            if DIRS[dir].0 != 0 && DIRS[dir].1 != 0 {
                cand.diag += 1;
            } else {
                cand.straight += 1;
            }
            let cand_cost = cand.value(p, 0.0);
            if best[id(next)].map_or(true, |b| cand_cost < b.value(p, 0.0)) {
                best[id(next)] = Some(cand);
                heap.push(HeapItem {
                    cost: cand_cost,
                    state: id(next),
                    count: cand,
                });
            }
        }
    }
    None
}

/// Dijkstra over the (cell, incoming direction) product graph with turning
/// penalties, the exact model of the turning-aware planner.
fn dijkstra_product(
    grid: &OccupancyGrid,
    start: CellIndex,
    goal: CellIndex,
    turn_cost: f64,
) -> Option<f64> {
    let p = grid.resolution();
    let n = grid.width() * grid.height() * 9;
    let cell_id = |c: CellIndex| c.row * grid.width() + c.col;
    let mut best: Vec<Option<Count>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    let start_state = cell_id(start) * 9 + 8;
    best[start_state] = Some(Count::default());
    heap.push(HeapItem {
        cost: 0.0,
        state: start_state,
        count: Count::default(),
    });
    let mut goal_best: Option<f64> = None;
    while let Some(item) = heap.pop() {
        let cell = CellIndex::new(
            (item.state / 9) % grid.width(),
            (item.state / 9) / grid.width(),
        );
        let dir_in = item.state % 9;
        let settled = best[item.state].unwrap();
        if item.cost > settled.value(p, turn_cost) {
            continue;
        }
        if cell == goal {
            goal_best = Some(match goal_best {
                None => item.cost,
                Some(b) => b.min(item.cost),
            });
            // The first settled goal state is optimal; direction variants
            // can only be costlier.
            return goal_best;
        }
        for dir in 0..8 {
            let Some(next) = step_allowed(grid, cell, dir) else {
                continue;
            };
            let mut cand = item.count;
            if DIRS[dir].0 != 0 && DIRS[dir].1 != 0 {
                cand.diag += 1;
            } else {
                cand.straight += 1;
            }
            if dir_in != 8 && dir != dir_in {
                cand.turns += 1;
            }
            let next_state = cell_id(next) * 9 + dir;
            let cand_cost = cand.value(p, turn_cost);
            if best[next_state].map_or(true, |b| cand_cost < b.value(p, turn_cost)) {
                best[next_state] = Some(cand);
                heap.push(HeapItem {
                    cost: cand_cost,
                    state: next_state,
                    count: cand,
                });
            }
        }
    }
    goal_best
}

fn random_grid(rng: &mut ChaCha8Rng, n: usize, p: f64, density: f64) -> OccupancyGrid {
    let cells = (0..n * n)
        .map(|_| {
            if rng.gen::<f64>() < density {
                Cell::Occupied
            } else {
                Cell::Free
            }
        })
        .collect();
    OccupancyGrid::new(n, n, p, Pose2::identity(), cells).unwrap()
}

fn random_free_pair(rng: &mut ChaCha8Rng, grid: &OccupancyGrid) -> Option<(CellIndex, CellIndex)> {
    for _ in 0..200 {
        let a = CellIndex::new(
            rng.gen_range(0..grid.width()),
            rng.gen_range(0..grid.height()),
        );
        let b = CellIndex::new(
            rng.gen_range(0..grid.width()),
            rng.gen_range(0..grid.height()),
        );
        if a != b && grid.is_free(a) && grid.is_free(b) {
            return Some((a, b));
        }
    }
    None
}

#[test]
fn baseline_matches_dijkstra_on_empty_grid() {
    let grid = OccupancyGrid::filled(10, 10, 0.5, Pose2::identity(), Cell::Free).unwrap();
    let q = PlanQuery::new(CellIndex::new(0, 0), CellIndex::new(9, 9));
    let path = plan_baseline_astar(&grid, &q).unwrap();
    assert_eq!(path.cost, cost_value(0, 9, 0, 0.5, 0.0));
    assert_eq!(path.cost, dijkstra_cells(&grid, q.start, q.goal).unwrap());
}

#[test]
fn baseline_matches_dijkstra_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut compared = 0;
    while compared < 50 {
        let grid = random_grid(&mut rng, 15, 0.25, 0.25);
        let Some((start, goal)) = random_free_pair(&mut rng, &grid) else {
            continue;
        };
        let q = PlanQuery::new(start, goal);
        match (plan_baseline_astar(&grid, &q), dijkstra_cells(&grid, start, goal)) {
            (Ok(path), Some(oracle)) => {
                assert_eq!(path.cost, oracle, "cost mismatch on grid {compared}");
                assert!(path.is_collision_free(&grid).unwrap());
                compared += 1;
            }
            (Err(_), None) => {}
            (got, oracle) => panic!(
                "reachability disagreement: planner {:?} vs oracle {:?}",
                got.map(|p| p.cost),
                oracle
            ),
        }
    }
}

#[test]
fn improved_with_zero_turn_cost_matches_dijkstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut compared = 0;
    while compared < 50 {
        let grid = random_grid(&mut rng, 30, 0.25, 0.2);
        let Some((start, goal)) = random_free_pair(&mut rng, &grid) else {
            continue;
        };
        let q = PlanQuery::new(start, goal);
        match (plan_improved_astar(&grid, &q), dijkstra_cells(&grid, start, goal)) {
            (Ok(path), Some(oracle)) => {
                assert_eq!(path.cost, oracle);
                compared += 1;
            }
            (Err(_), None) => {}
            (got, oracle) => panic!(
                "reachability disagreement: planner {:?} vs oracle {:?}",
                got.map(|p| p.cost),
                oracle
            ),
        }
    }
}

#[test]
fn turning_aware_matches_product_dijkstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut compared = 0;
    while compared < 50 {
        let grid = random_grid(&mut rng, 20, 0.25, 0.22);
        let Some((start, goal)) = random_free_pair(&mut rng, &grid) else {
            continue;
        };
        let turn_cost = 2.0 * grid.resolution();
        let q = PlanQuery::new(start, goal).with_turning_cost(turn_cost);
        match (
            plan_improved_astar(&grid, &q),
            dijkstra_product(&grid, start, goal, turn_cost),
        ) {
            (Ok(path), Some(oracle)) => {
                assert_eq!(path.cost, oracle, "exact cost mismatch on grid {compared}");
                compared += 1;
            }
            (Err(_), None) => {}
            (got, oracle) => panic!(
                "reachability disagreement: planner {:?} vs oracle {:?}",
                got.map(|p| p.cost),
                oracle
            ),
        }
    }
}

#[test]
fn turning_penalty_straightens_corridor_path() {
    // A snake corridor: offset walls force the route to weave; the
    // turning-aware path spends length to avoid gratuitous zig-zags.
    let mut grid = OccupancyGrid::filled(20, 20, 0.25, Pose2::identity(), Cell::Free).unwrap();
    for (i, row) in (4..20).step_by(4).enumerate() {
        let cols = if i % 2 == 0 { 0..15 } else { 5..20 };
        for col in cols {
            grid.set_cell(CellIndex::new(col, row), Cell::Occupied).unwrap();
        }
    }
    let start = CellIndex::new(1, 1);
    let goal = CellIndex::new(18, 18);
    let base = plan_baseline_astar(&grid, &PlanQuery::new(start, goal)).unwrap();
    let improved = plan_improved_astar(
        &grid,
        &PlanQuery::new(start, goal).with_turning_cost(2.0 * grid.resolution()),
    )
    .unwrap();
    let mb = path_metrics(&base).unwrap();
    let mi = path_metrics(&improved).unwrap();
    assert!(
        mi.total_turning_deg < mb.total_turning_deg,
        "turning {} vs baseline {}",
        mi.total_turning_deg,
        mb.total_turning_deg
    );
    assert!(mi.length_m >= mb.length_m - 1e-12);
}

#[test]
fn early_exit_path_is_valid_and_visible() {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    for _ in 0..20 {
        let grid = random_grid(&mut rng, 25, 0.25, 0.2);
        let Some((start, goal)) = random_free_pair(&mut rng, &grid) else {
            continue;
        };
        let q = PlanQuery::new(start, goal)
            .with_turning_cost(0.5)
            .with_early_termination(true);
        if let Ok(path) = plan_improved_astar(&grid, &q) {
            assert_eq!(path.cells.first(), Some(&start));
            assert_eq!(path.cells.last(), Some(&goal));
            assert!(path.is_collision_free(&grid).unwrap());
        }
    }
}

#[test]
fn pruning_preserves_visibility_and_shortens() {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut checked = 0;
    while checked < 25 {
        let grid = random_grid(&mut rng, 30, 0.2, 0.2);
        let Some((start, goal)) = random_free_pair(&mut rng, &grid) else {
            continue;
        };
        let q = PlanQuery::new(start, goal).with_turning_cost(0.4);
        let Ok(path) = plan_improved_astar(&grid, &q) else {
            continue;
        };
        let pruned = prune_collinear(&grid, &path).unwrap();
        // Endpoints kept.
        assert_eq!(pruned.cells.first(), path.cells.first());
        assert_eq!(pruned.cells.last(), path.cells.last());
        // Consecutive waypoints mutually visible.
        for pair in pruned.cells.windows(2) {
            assert!(line_of_sight(&grid, pair[0], pair[1]).unwrap());
        }
        // Never longer than the raw path.
        let raw_len = polyline_len(&path);
        let pruned_len = polyline_len(&pruned);
        assert!(pruned_len <= raw_len + 1e-9);
        // Fixed point.
        let again = prune_collinear(&grid, &pruned).unwrap();
        assert_eq!(again.cells, pruned.cells);
        checked += 1;
    }
}

fn polyline_len(path: &PlannedPath) -> f64 {
    path.world_points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .sum()
}

#[test]
fn metrics_recompute_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let grid = random_grid(&mut rng, 30, 0.2, 0.15);
    let Some((start, goal)) = random_free_pair(&mut rng, &grid) else {
        panic!("no free pair");
    };
    let Ok(path) = plan_improved_astar(
        &grid,
        &PlanQuery::new(start, goal).with_turning_cost(0.4),
    ) else {
        return;
    };
    let pruned = prune_collinear(&grid, &path).unwrap();
    if pruned.cells.len() < 2 {
        return;
    }
    let m = path_metrics(&pruned).unwrap();
    // Independent recomputation from raw waypoints.
    let pts = &pruned.world_points;
    let mut length = 0.0;
    for w in pts.windows(2) {
        length += (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
    }
    let mut turning = 0.0;
    let mut inflections = 0;
    for w in pts.windows(3) {
        let a1 = (w[1].1 - w[0].1).atan2(w[1].0 - w[0].0);
        let a2 = (w[2].1 - w[1].1).atan2(w[2].0 - w[1].0);
        let mut d = (a2 - a1).abs();
        if d > std::f64::consts::PI {
            d = 2.0 * std::f64::consts::PI - d;
        }
        if d > 1e-9 {
            turning += d;
            inflections += 1;
        }
    }
    assert!((m.length_m - length).abs() < 1e-12);
    assert!((m.total_turning_deg - turning.to_degrees()).abs() < 1e-9);
    assert_eq!(m.inflection_count, inflections);
}
