//! Occupancy grids: representation, obstacle inflation, point-cloud
//! projection, line-of-sight queries, and map file I/O.

mod io;

pub use io::{load_grid, load_point_cloud, save_grid, save_point_cloud};

use crate::se2::Pose2;
use thiserror::Error;

/// Classification of a single grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

impl Cell {
    /// Unknown cells are treated as obstacles for planning and inflation.
    pub fn is_traversable(&self) -> bool {
        matches!(self, Cell::Free)
    }
}

/// Column/row address of a grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub fn new(col: usize, row: usize) -> Self {
        CellIndex { col, row }
    }
}

/// A 3D point cloud in the map frame.
#[derive(Clone, Debug, Default)]
pub struct PointCloud3 {
    pub points: Vec<[f64; 3]>,
}

impl PointCloud3 {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        PointCloud3 { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("resolution must be positive, got {0}")]
    InvalidResolution(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cell ({0}, {1}) out of bounds for {2}x{3} grid")]
    IndexOutOfBounds(usize, usize, usize, usize),
    #[error("world point ({0}, {1}) outside the map")]
    OutOfMap(f64, f64),
    #[error("cannot build a grid from an empty point cloud")]
    EmptyCloud,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A 2D occupancy grid. `origin` is the pose of cell (0,0)'s corner in the
/// map frame; cells are stored row-major, row 0 first.
///
/// Grids are immutable after construction; operations return new grids.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2,
    cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2,
        cells: Vec<Cell>,
    ) -> Result<Self, GridError> {
        if resolution <= 0.0 || !resolution.is_finite() {
            return Err(GridError::InvalidResolution(resolution));
        }
        if width == 0 || height == 0 {
            return Err(GridError::InvalidArgument(
                "grid must be at least 1x1".into(),
            ));
        }
        if cells.len() != width * height {
            return Err(GridError::InvalidArgument(format!(
                "cell count {} does not match {}x{}",
                cells.len(),
                width,
                height
            )));
        }
        Ok(OccupancyGrid {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2,
        fill: Cell,
    ) -> Result<Self, GridError> {
        Self::new(width, height, resolution, origin, vec![fill; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2 {
        self.origin
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        c.col < self.width && c.row < self.height
    }

    pub fn cell(&self, c: CellIndex) -> Result<Cell, GridError> {
        if !self.contains(c) {
            return Err(GridError::IndexOutOfBounds(
                c.col,
                c.row,
                self.width,
                self.height,
            ));
        }
        Ok(self.cells[c.row * self.width + c.col])
    }

    /// Panics if out of bounds; for use after a bounds check.
    pub fn cell_unchecked(&self, col: usize, row: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    pub fn set_cell(&mut self, c: CellIndex, value: Cell) -> Result<(), GridError> {
        if !self.contains(c) {
            return Err(GridError::IndexOutOfBounds(
                c.col,
                c.row,
                self.width,
                self.height,
            ));
        }
        self.cells[c.row * self.width + c.col] = value;
        Ok(())
    }

    pub fn is_free(&self, c: CellIndex) -> bool {
        self.contains(c) && self.cells[c.row * self.width + c.col].is_traversable()
    }

    /// Cell containing the given map-frame point.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Result<CellIndex, GridError> {
        let (gx, gy) = self.origin.inverse_transform_point(x, y);
        let col = (gx / self.resolution).floor();
        let row = (gy / self.resolution).floor();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return Err(GridError::OutOfMap(x, y));
        }
        Ok(CellIndex::new(col as usize, row as usize))
    }

    /// Map-frame coordinates of the cell center.
    pub fn cell_to_world(&self, c: CellIndex) -> (f64, f64) {
        let gx = (c.col as f64 + 0.5) * self.resolution;
        let gy = (c.row as f64 + 0.5) * self.resolution;
        self.origin.transform_point(gx, gy)
    }

    pub fn occupied_cell_centers(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                if self.cell_unchecked(col, row) == Cell::Occupied {
                    out.push(self.cell_to_world(CellIndex::new(col, row)));
                }
            }
        }
        out
    }
}

/// Number of cells an obstacle must be expanded by to guarantee a metric
/// clearance of `d_s` on a grid of the given resolution: `ceil(d_s / p)`.
pub fn inflation_radius_cells(d_s: f64, resolution: f64) -> Result<usize, GridError> {
    if resolution <= 0.0 || !resolution.is_finite() {
        return Err(GridError::InvalidResolution(resolution));
    }
    if d_s < 0.0 || !d_s.is_finite() {
        return Err(GridError::InvalidArgument(format!(
            "clearance must be non-negative, got {d_s}"
        )));
    }
    let q = d_s / resolution;
    // Guard against representation noise turning an exact multiple into an
    // extra cell (e.g. 0.4 / 0.1).
    let n = if (q - q.round()).abs() < 1e-9 {
        q.round()
    } else {
        q.ceil()
    };
    Ok(n as usize)
}

/// Expand obstacles by the Chebyshev (square) dilation of `ceil(d_s / p)`
/// cells. Unknown cells seed the dilation like occupied ones. With zero
/// clearance the grid is returned unchanged.
pub fn inflate(grid: &OccupancyGrid, d_s: f64) -> Result<OccupancyGrid, GridError> {
    let n_ex = inflation_radius_cells(d_s, grid.resolution)? as isize;
    if n_ex == 0 {
        return Ok(grid.clone());
    }
    let mut out = grid.clone();
    for row in 0..grid.height {
        for col in 0..grid.width {
            if grid.cell_unchecked(col, row) == Cell::Free {
                continue;
            }
            let r0 = (row as isize - n_ex).max(0) as usize;
            let r1 = ((row as isize + n_ex) as usize).min(grid.height - 1);
            let c0 = (col as isize - n_ex).max(0) as usize;
            let c1 = ((col as isize + n_ex) as usize).min(grid.width - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    out.cells[r * grid.width + c] = Cell::Occupied;
                }
            }
        }
    }
    Ok(out)
}

/// Keep only the points with `z_min <= z <= z_max`, preserving order.
pub fn height_filter(
    cloud: &PointCloud3,
    z_min: f64,
    z_max: f64,
) -> Result<PointCloud3, GridError> {
    if z_min > z_max {
        return Err(GridError::InvalidArgument(format!(
            "z band is empty: [{z_min}, {z_max}]"
        )));
    }
    Ok(PointCloud3::new(
        cloud
            .points
            .iter()
            .copied()
            .filter(|p| p[2] >= z_min && p[2] <= z_max)
            .collect(),
    ))
}

/// Project a (height-filtered) cloud onto a 2D occupancy grid.
///
/// The grid covers the tight bounding box of the cloud expanded by one cell
/// of margin; `frame` orients the grid axes (points are binned in that
/// frame). A cell is occupied iff at least `min_hits` points fall inside it;
/// every other covered cell is free.
pub fn project_to_grid(
    cloud: &PointCloud3,
    resolution: f64,
    frame: &Pose2,
    min_hits: usize,
) -> Result<OccupancyGrid, GridError> {
    if resolution <= 0.0 || !resolution.is_finite() {
        return Err(GridError::InvalidResolution(resolution));
    }
    if min_hits == 0 {
        return Err(GridError::InvalidArgument(
            "min_hits must be at least 1".into(),
        ));
    }
    if cloud.is_empty() {
        return Err(GridError::EmptyCloud);
    }

    let local: Vec<(f64, f64)> = cloud
        .points
        .iter()
        .map(|p| frame.inverse_transform_point(p[0], p[1]))
        .collect();
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &local {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }

    // One cell of margin on every side; the data region starts at cell (1,1).
    let width = ((max_x - min_x) / resolution).floor() as usize + 3;
    let height = ((max_y - min_y) / resolution).floor() as usize + 3;
    let corner = Pose2::new(min_x - resolution, min_y - resolution, 0.0);
    let origin = frame.compose(&corner);

    let mut hits = vec![0usize; width * height];
    for &(x, y) in &local {
        let col = ((x - min_x) / resolution).floor() as usize + 1;
        let row = ((y - min_y) / resolution).floor() as usize + 1;
        let col = col.min(width - 1);
        let row = row.min(height - 1);
        hits[row * width + col] += 1;
    }
    let cells = hits
        .into_iter()
        .map(|h| if h >= min_hits { Cell::Occupied } else { Cell::Free })
        .collect();
    OccupancyGrid::new(width, height, resolution, origin, cells)
}

/// Every cell traversed by the supercover line between the centers of `a`
/// and `b`, both cells at exact diagonal corner crossings included.
pub fn supercover_line(a: CellIndex, b: CellIndex) -> Vec<CellIndex> {
    let (x1, y1) = (a.col as i64, a.row as i64);
    let (x2, y2) = (b.col as i64, b.row as i64);
    let mut out = vec![a];
    let (mut x, mut y) = (x1, y1);
    let (dx, dy) = (x2 - x1, y2 - y1);
    let xstep: i64 = if dx < 0 { -1 } else { 1 };
    let ystep: i64 = if dy < 0 { -1 } else { 1 };
    let (dx, dy) = (dx.abs(), dy.abs());
    let (ddx, ddy) = (2 * dx, 2 * dy);
    let push = |out: &mut Vec<CellIndex>, cx: i64, cy: i64| {
        out.push(CellIndex::new(cx as usize, cy as usize));
    };

    if ddx >= ddy {
        let mut error = dx;
        let mut errorprev = dx;
        for _ in 0..dx {
            x += xstep;
            error += ddy;
            if error > ddx {
                y += ystep;
                error -= ddx;
                match (error + errorprev).cmp(&ddx) {
                    std::cmp::Ordering::Less => push(&mut out, x, y - ystep),
                    std::cmp::Ordering::Greater => push(&mut out, x - xstep, y),
                    std::cmp::Ordering::Equal => {
                        // Exact corner crossing: take both neighbors.
                        push(&mut out, x, y - ystep);
                        push(&mut out, x - xstep, y);
                    }
                }
            }
            push(&mut out, x, y);
            errorprev = error;
        }
    } else {
        let mut error = dy;
        let mut errorprev = dy;
        for _ in 0..dy {
            y += ystep;
            error += ddx;
            if error > ddy {
                x += xstep;
                error -= ddy;
                match (error + errorprev).cmp(&ddy) {
                    std::cmp::Ordering::Less => push(&mut out, x - xstep, y),
                    std::cmp::Ordering::Greater => push(&mut out, x, y - ystep),
                    std::cmp::Ordering::Equal => {
                        push(&mut out, x - xstep, y);
                        push(&mut out, x, y - ystep);
                    }
                }
            }
            push(&mut out, x, y);
            errorprev = error;
        }
    }
    out
}

/// True iff every cell on the supercover line between the centers of `a`
/// and `b` is free.
pub fn line_of_sight(grid: &OccupancyGrid, a: CellIndex, b: CellIndex) -> Result<bool, GridError> {
    for c in [a, b] {
        if !grid.contains(c) {
            return Err(GridError::IndexOutOfBounds(
                c.col,
                c.row,
                grid.width,
                grid.height,
            ));
        }
    }
    Ok(supercover_line(a, b)
        .into_iter()
        .all(|c| grid.cell_unchecked(c.col, c.row).is_traversable()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, p_occ: f64) -> OccupancyGrid {
        let cells = (0..w * h)
            .map(|_| {
                let r: f64 = rng.gen();
                if r < p_occ {
                    Cell::Occupied
                } else if r < p_occ + 0.05 {
                    Cell::Unknown
                } else {
                    Cell::Free
                }
            })
            .collect();
        OccupancyGrid::new(w, h, 0.1, Pose2::identity(), cells).unwrap()
    }

    /// Brute-force Chebyshev dilation oracle.
    fn inflate_brute(grid: &OccupancyGrid, n_ex: usize) -> Vec<Cell> {
        let (w, h) = (grid.width(), grid.height());
        let mut out = grid.cells().to_vec();
        for row in 0..h {
            for col in 0..w {
                let mut near_seed = false;
                'seek: for r in 0..h {
                    for c in 0..w {
                        if grid.cell_unchecked(c, r) != Cell::Free {
                            let d = (r as i64 - row as i64)
                                .abs()
                                .max((c as i64 - col as i64).abs());
                            if d <= n_ex as i64 {
                                near_seed = true;
                                break 'seek;
                            }
                        }
                    }
                }
                if near_seed {
                    out[row * w + col] = Cell::Occupied;
                }
            }
        }
        out
    }

    #[test]
    fn inflation_radius_examples() {
        assert_eq!(inflation_radius_cells(0.0, 0.1).unwrap(), 0);
        assert_eq!(inflation_radius_cells(0.35, 0.1).unwrap(), 4);
        assert_eq!(inflation_radius_cells(0.4, 0.1).unwrap(), 4);
        assert!(inflation_radius_cells(0.1, 0.0).is_err());
        assert!(inflation_radius_cells(0.1, -1.0).is_err());
    }

    #[test]
    fn inflate_zero_clearance_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_grid(&mut rng, 12, 9, 0.2);
        let out = inflate(&g, 0.0).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn inflate_single_cell_neighborhood() {
        let mut g = OccupancyGrid::filled(7, 7, 0.1, Pose2::identity(), Cell::Free).unwrap();
        g.set_cell(CellIndex::new(3, 3), Cell::Occupied).unwrap();
        let out = inflate(&g, 0.1).unwrap();
        for row in 0..7 {
            for col in 0..7 {
                let expect = (3i64 - row as i64).abs().max((3i64 - col as i64).abs()) <= 1;
                assert_eq!(
                    out.cell_unchecked(col, row) == Cell::Occupied,
                    expect,
                    "cell ({col},{row})"
                );
            }
        }
    }

    #[test]
    fn inflate_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = random_grid(&mut rng, 30, 30, 0.1);
            let out = inflate(&g, 0.2).unwrap(); // n_ex = 2
            assert_eq!(out.cells(), inflate_brute(&g, 2).as_slice());
        }
    }

    #[test]
    fn inflate_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_grid(&mut rng, 25, 25, 0.15);
        let out = inflate(&g, 0.25).unwrap();
        for (before, after) in g.cells().iter().zip(out.cells()) {
            if *before == Cell::Occupied {
                assert_eq!(*after, Cell::Occupied);
            }
        }
    }

    #[test]
    fn height_filter_examples() {
        let empty = height_filter(&PointCloud3::default(), 0.0, 1.0).unwrap();
        assert!(empty.is_empty());

        let cloud = PointCloud3::new(vec![
            [0.0, 0.0, -0.1],
            [1.0, 0.0, 0.2],
            [2.0, 0.0, 1.9],
            [3.0, 0.0, 2.5],
        ]);
        let out = height_filter(&cloud, 0.1, 2.0).unwrap();
        let zs: Vec<f64> = out.points.iter().map(|p| p[2]).collect();
        assert_eq!(zs, vec![0.2, 1.9]);

        assert!(height_filter(&cloud, 2.0, 0.1).is_err());
    }

    #[test]
    fn height_filter_recount_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cloud = PointCloud3::new(
            (0..10_000)
                .map(|_| {
                    [
                        rng.gen_range(-5.0..5.0),
                        rng.gen_range(-5.0..5.0),
                        rng.gen_range(0.0..3.0),
                    ]
                })
                .collect(),
        );
        let (lo, hi) = (0.9, 1.8);
        let out = height_filter(&cloud, lo, hi).unwrap();
        let expect = cloud
            .points
            .iter()
            .filter(|p| p[2] >= lo && p[2] <= hi)
            .count();
        assert_eq!(out.len(), expect);
        assert!(out.len() <= cloud.len());
        assert!(out.points.iter().all(|p| p[2] >= lo && p[2] <= hi));
    }

    #[test]
    fn project_single_point() {
        let cloud = PointCloud3::new(vec![[0.55, 0.72, 0.5]]);
        let g = project_to_grid(&cloud, 1.0, &Pose2::identity(), 1).unwrap();
        let occupied: Vec<CellIndex> = (0..g.height())
            .flat_map(|r| (0..g.width()).map(move |c| CellIndex::new(c, r)))
            .filter(|&c| g.cell(c).unwrap() == Cell::Occupied)
            .collect();
        assert_eq!(occupied.len(), 1);
        let c = g.world_to_cell(0.55, 0.72).unwrap();
        assert_eq!(occupied[0], c);

        // Threshold not met.
        let g2 = project_to_grid(&cloud, 1.0, &Pose2::identity(), 2).unwrap();
        assert!(g2.cells().iter().all(|&c| c == Cell::Free));

        assert!(matches!(
            project_to_grid(&PointCloud3::default(), 1.0, &Pose2::identity(), 1),
            Err(GridError::EmptyCloud)
        ));
    }

    #[test]
    fn project_wall_is_one_cell_thick() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let cloud = PointCloud3::new(
            (0..500)
                .map(|i| {
                    let x = 5.0 * (i as f64) / 499.0;
                    [x, 2.0 + rng.gen_range(-0.01..0.01), 1.0]
                })
                .collect(),
        );
        let g = project_to_grid(&cloud, 0.1, &Pose2::identity(), 1).unwrap();
        let mut rows = std::collections::BTreeSet::new();
        let mut count = 0;
        for row in 0..g.height() {
            for col in 0..g.width() {
                if g.cell_unchecked(col, row) == Cell::Occupied {
                    rows.insert(row);
                    count += 1;
                }
            }
        }
        assert_eq!(rows.len(), 1, "wall should occupy a single row");
        assert!((48..=52).contains(&count), "expected ~50 cells, got {count}");
    }

    #[test]
    fn world_cell_round_trip() {
        let g =
            OccupancyGrid::filled(10, 10, 1.0, Pose2::identity(), Cell::Free).unwrap();
        assert_eq!(g.world_to_cell(0.5, 0.5).unwrap(), CellIndex::new(0, 0));
        for row in 0..10 {
            for col in 0..10 {
                let c = CellIndex::new(col, row);
                let (x, y) = g.cell_to_world(c);
                assert_eq!(g.world_to_cell(x, y).unwrap(), c);
            }
        }

        let g = OccupancyGrid::filled(
            20,
            20,
            0.5,
            Pose2::new(-5.0, -5.0, 0.0),
            Cell::Free,
        )
        .unwrap();
        assert_eq!(g.world_to_cell(0.0, 0.0).unwrap(), CellIndex::new(10, 10));
        assert!(g.world_to_cell(100.0, 0.0).is_err());
    }

    #[test]
    fn line_of_sight_trivial() {
        let g = OccupancyGrid::filled(20, 20, 0.1, Pose2::identity(), Cell::Free).unwrap();
        let a = CellIndex::new(3, 3);
        assert!(line_of_sight(&g, a, a).unwrap());
        assert!(line_of_sight(&g, CellIndex::new(0, 0), CellIndex::new(19, 7)).unwrap());
        assert!(line_of_sight(&g, CellIndex::new(0, 19), CellIndex::new(19, 0)).unwrap());
        assert!(line_of_sight(&g, CellIndex::new(0, 0), CellIndex::new(25, 0)).is_err());
    }

    #[test]
    fn line_of_sight_wall_and_gap() {
        let mut g = OccupancyGrid::filled(20, 20, 0.1, Pose2::identity(), Cell::Free).unwrap();
        for row in 0..20 {
            g.set_cell(CellIndex::new(10, row), Cell::Occupied).unwrap();
        }
        let a = CellIndex::new(2, 9);
        let b = CellIndex::new(17, 9);
        assert!(!line_of_sight(&g, a, b).unwrap());
        // Open exactly the cell the segment crosses; dense p/10 sampling of
        // the segment confirms that is the single wall cell it touches.
        g.set_cell(CellIndex::new(10, 9), Cell::Free).unwrap();
        let crossed: std::collections::BTreeSet<CellIndex> = (0..=1500)
            .map(|i| {
                let t = i as f64 / 1500.0;
                let x = 0.25 + t * (1.75 - 0.25);
                let y = 0.95;
                g.world_to_cell(x, y).unwrap()
            })
            .filter(|c| c.col == 10)
            .collect();
        assert_eq!(crossed.len(), 1);
        assert!(crossed.contains(&CellIndex::new(10, 9)));
        assert!(line_of_sight(&g, a, b).unwrap());
        // A gap off the segment does not help.
        g.set_cell(CellIndex::new(10, 9), Cell::Occupied).unwrap();
        g.set_cell(CellIndex::new(10, 15), Cell::Free).unwrap();
        assert!(!line_of_sight(&g, a, b).unwrap());
    }

    #[test]
    fn line_of_sight_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let g = random_grid(&mut rng, 25, 25, 0.2);
        for _ in 0..500 {
            let a = CellIndex::new(rng.gen_range(0..25), rng.gen_range(0..25));
            let b = CellIndex::new(rng.gen_range(0..25), rng.gen_range(0..25));
            assert_eq!(
                line_of_sight(&g, a, b).unwrap(),
                line_of_sight(&g, b, a).unwrap(),
                "asymmetric LOS between {a:?} and {b:?}"
            );
        }
    }

    #[test]
    fn supercover_includes_both_corner_cells() {
        // The diagonal of a 2x2 block passes exactly through the shared
        // corner; both off-diagonal cells must be reported.
        let cells = supercover_line(CellIndex::new(0, 0), CellIndex::new(1, 1));
        assert!(cells.contains(&CellIndex::new(0, 1)));
        assert!(cells.contains(&CellIndex::new(1, 0)));
        assert!(cells.contains(&CellIndex::new(0, 0)));
        assert!(cells.contains(&CellIndex::new(1, 1)));
    }
}
