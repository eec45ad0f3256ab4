//! Deterministic fixture generators: the planning benchmark map and the
//! end-to-end corridor world with its point cloud. The committed fixture
//! files under `fixtures/` are generated by these functions; a test pins
//! them together.

use nav_core::grid::{Cell, CellIndex, OccupancyGrid, PointCloud3};
use nav_core::se2::Pose2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded 50x50 benchmark map at 0.25 m: border walls, scattered blocks,
/// and short wall segments that force detours and weaving.
pub fn bench_map(seed: u64) -> OccupancyGrid {
    let (w, h) = (50usize, 50usize);
    let mut grid =
        OccupancyGrid::filled(w, h, 0.25, Pose2::identity(), Cell::Free).unwrap();
    let set = |g: &mut OccupancyGrid, c: i64, r: i64| {
        if c >= 0 && r >= 0 && (c as usize) < w && (r as usize) < h {
            g.set_cell(CellIndex::new(c as usize, r as usize), Cell::Occupied)
                .unwrap();
        }
    };
    for i in 0..w as i64 {
        set(&mut grid, i, 0);
        set(&mut grid, i, h as i64 - 1);
        set(&mut grid, 0, i);
        set(&mut grid, w as i64 - 1, i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Scattered single cells.
    for _ in 0..110 {
        let c = rng.gen_range(2..w as i64 - 2);
        let r = rng.gen_range(2..h as i64 - 2);
        set(&mut grid, c, r);
    }
    // 2x2 blocks.
    for _ in 0..26 {
        let c = rng.gen_range(2..w as i64 - 3);
        let r = rng.gen_range(2..h as i64 - 3);
        for dc in 0..2 {
            for dr in 0..2 {
                set(&mut grid, c + dc, r + dr);
            }
        }
    }
    // Short walls.
    for _ in 0..12 {
        let c = rng.gen_range(3..w as i64 - 10);
        let r = rng.gen_range(3..h as i64 - 10);
        let len = rng.gen_range(4..9);
        let horizontal = rng.gen_bool(0.5);
        for i in 0..len {
            if horizontal {
                set(&mut grid, c + i, r);
            } else {
                set(&mut grid, c, r + i);
            }
        }
    }
    grid
}

/// Ground-truth corridor world for the end-to-end runs: a 22 m x 9 m yard
/// with two baffle walls forming an S-shaped route, at 0.1 m resolution.
pub fn corridor_world() -> OccupancyGrid {
    let (w, h) = (220usize, 90usize);
    let mut grid =
        OccupancyGrid::filled(w, h, 0.1, Pose2::identity(), Cell::Free).unwrap();
    let wall = |g: &mut OccupancyGrid, c0: usize, r0: usize, c1: usize, r1: usize| {
        for c in c0..=c1 {
            for r in r0..=r1 {
                g.set_cell(CellIndex::new(c, r), Cell::Occupied).unwrap();
            }
        }
    };
    wall(&mut grid, 0, 0, w - 1, 0);
    wall(&mut grid, 0, h - 1, w - 1, h - 1);
    wall(&mut grid, 0, 0, 0, h - 1);
    wall(&mut grid, w - 1, 0, w - 1, h - 1);
    // Baffle A: from the bottom, two thirds up, at x = 7 m.
    wall(&mut grid, 70, 0, 71, 59);
    // Baffle B: from the top, two thirds down, at x = 14 m.
    wall(&mut grid, 140, 30, 141, h - 1);
    grid
}

/// Segment descriptions of the corridor walls in meters
/// (x0, y0, x1, y1); shared by the world grid and the synthetic cloud.
fn corridor_wall_segments() -> Vec<(f64, f64, f64, f64)> {
    vec![
        (0.05, 0.05, 21.95, 0.05),
        (0.05, 8.95, 21.95, 8.95),
        (0.05, 0.05, 0.05, 8.95),
        (21.95, 0.05, 21.95, 8.95),
        (7.05, 0.05, 7.05, 5.95),
        (14.05, 3.05, 14.05, 8.95),
    ]
}

/// Synthetic mapped point cloud of the corridor: wall returns at several
/// heights, ground returns below the useful band, and canopy returns above
/// it. Projecting the height-filtered cloud reproduces the corridor walls.
pub fn corridor_cloud() -> PointCloud3 {
    let mut points = Vec::new();
    for (x0, y0, x1, y1) in corridor_wall_segments() {
        let len = (x1 - x0).hypot(y1 - y0);
        let n = (len / 0.05).ceil() as usize;
        for i in 0..=n {
            let f = i as f64 / n as f64;
            let x = x0 + f * (x1 - x0);
            let y = y0 + f * (y1 - y0);
            for z in [0.4, 0.9, 1.5] {
                points.push([x, y, z]);
            }
        }
    }
    // Ground returns: filtered out by the z band.
    let mut gy = 0.4;
    while gy < 8.6 {
        let mut gx = 0.4;
        while gx < 21.6 {
            points.push([gx, gy, 0.02]);
            gx += 0.5;
        }
        gy += 0.5;
    }
    // Overhanging canopy, also filtered out.
    for i in 0..30 {
        points.push([3.0 + 0.6 * i as f64, 4.5, 2.4]);
    }
    PointCloud3::new(points)
}

/// Start and goal of the corridor scenario, in meters.
pub fn corridor_endpoints() -> ((f64, f64), (f64, f64)) {
    ((2.0, 2.0), (20.0, 7.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_map_is_mostly_free() {
        let g = bench_map(7);
        let occupied = g
            .cells()
            .iter()
            .filter(|&&c| c == Cell::Occupied)
            .count();
        let density = occupied as f64 / (g.width() * g.height()) as f64;
        assert!(density > 0.1 && density < 0.35, "density {density}");
    }

    #[test]
    fn corridor_world_has_s_shape() {
        let g = corridor_world();
        // Gap above baffle A.
        assert!(g.is_free(CellIndex::new(70, 75)));
        assert!(!g.is_free(CellIndex::new(70, 30)));
        // Gap below baffle B.
        assert!(g.is_free(CellIndex::new(140, 15)));
        assert!(!g.is_free(CellIndex::new(140, 60)));
    }

    #[test]
    fn corridor_cloud_spans_height_bands() {
        let cloud = corridor_cloud();
        assert!(cloud.points.iter().any(|p| p[2] < 0.1));
        assert!(cloud.points.iter().any(|p| p[2] > 2.0));
        assert!(cloud
            .points
            .iter()
            .any(|p| p[2] > 0.1 && p[2] < 2.0));
    }
}
