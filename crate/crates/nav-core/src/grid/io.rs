//! ASCII map and point-cloud file formats.
//!
//! Grid files:
//!
//! ```text
//! gridmap 1
//! width <int> height <int> resolution <float> origin <x> <y> <theta>
//! <height rows of width glyphs, row 0 first; '.' free, '#' occupied, '?' unknown>
//! ```
//!
//! Point-cloud files carry one `x y z` float triple per line; `#` starts a
//! comment.

use super::{Cell, GridError, OccupancyGrid, PointCloud3};
use crate::se2::Pose2;
use std::fmt::Write as _;
use std::path::Path;

fn glyph(cell: Cell) -> char {
    match cell {
        Cell::Free => '.',
        Cell::Occupied => '#',
        Cell::Unknown => '?',
    }
}

fn cell_from_glyph(g: char) -> Option<Cell> {
    match g {
        '.' => Some(Cell::Free),
        '#' => Some(Cell::Occupied),
        '?' => Some(Cell::Unknown),
        _ => None,
    }
}

/// Serialize a grid to the canonical ASCII form (LF line endings).
pub fn grid_to_string(grid: &OccupancyGrid) -> String {
    let mut s = String::new();
    s.push_str("gridmap 1\n");
    let o = grid.origin();
    let _ = writeln!(
        s,
        "width {} height {} resolution {} origin {} {} {}",
        grid.width(),
        grid.height(),
        grid.resolution(),
        o.x,
        o.y,
        o.theta()
    );
    for row in 0..grid.height() {
        for col in 0..grid.width() {
            s.push(glyph(grid.cell_unchecked(col, row)));
        }
        s.push('\n');
    }
    s
}

pub fn grid_from_string(text: &str) -> Result<OccupancyGrid, GridError> {
    let mut lines = text.lines().enumerate();

    let (n, magic) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?;
    if magic.trim() != "gridmap 1" {
        return Err(parse_err(n + 1, "expected magic line `gridmap 1`"));
    }

    let (n, header) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing header line"))?;
    let header_line = n + 1;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 10
        || tokens[0] != "width"
        || tokens[2] != "height"
        || tokens[4] != "resolution"
        || tokens[6] != "origin"
    {
        return Err(parse_err(
            header_line,
            "expected `width <int> height <int> resolution <float> origin <x> <y> <theta>`",
        ));
    }
    let width: usize = tokens[1]
        .parse()
        .map_err(|_| parse_err(header_line, "bad width"))?;
    let height: usize = tokens[3]
        .parse()
        .map_err(|_| parse_err(header_line, "bad height"))?;
    let resolution: f64 = tokens[5]
        .parse()
        .map_err(|_| parse_err(header_line, "bad resolution"))?;
    let ox: f64 = tokens[7]
        .parse()
        .map_err(|_| parse_err(header_line, "bad origin x"))?;
    let oy: f64 = tokens[8]
        .parse()
        .map_err(|_| parse_err(header_line, "bad origin y"))?;
    let ot: f64 = tokens[9]
        .parse()
        .map_err(|_| parse_err(header_line, "bad origin theta"))?;

    let mut cells = Vec::with_capacity(width * height);
    for row in 0..height {
        let (n, line) = lines.next().ok_or_else(|| {
            parse_err(header_line + row + 1, &format!("missing row {row}"))
        })?;
        let line_no = n + 1;
        let glyphs: Vec<char> = line.trim_end().chars().collect();
        if glyphs.len() != width {
            return Err(parse_err(
                line_no,
                &format!(
                    "row {row} has {} glyphs, expected {width}",
                    glyphs.len()
                ),
            ));
        }
        for (col, g) in glyphs.into_iter().enumerate() {
            cells.push(cell_from_glyph(g).ok_or_else(|| {
                parse_err(line_no, &format!("unknown cell glyph `{g}` at column {col}"))
            })?);
        }
    }

    OccupancyGrid::new(width, height, resolution, Pose2::new(ox, oy, ot), cells)
}

fn parse_err(line: usize, message: &str) -> GridError {
    GridError::Parse {
        line,
        message: message.to_string(),
    }
}

pub fn save_grid(grid: &OccupancyGrid, path: impl AsRef<Path>) -> Result<(), GridError> {
    std::fs::write(path, grid_to_string(grid))?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<OccupancyGrid, GridError> {
    grid_from_string(&std::fs::read_to_string(path)?)
}

pub fn cloud_to_string(cloud: &PointCloud3) -> String {
    let mut s = String::new();
    for p in &cloud.points {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    s
}

pub fn cloud_from_string(text: &str) -> Result<PointCloud3, GridError> {
    let mut points = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 3 {
            return Err(parse_err(
                n + 1,
                &format!("expected 3 values per point, found {}", vals.len()),
            ));
        }
        let mut p = [0.0f64; 3];
        for (i, v) in vals.iter().enumerate() {
            p[i] = v
                .parse()
                .map_err(|_| parse_err(n + 1, &format!("bad float `{v}`")))?;
            if !p[i].is_finite() {
                return Err(parse_err(n + 1, "coordinates must be finite"));
            }
        }
        points.push(p);
    }
    Ok(PointCloud3::new(points))
}

pub fn save_point_cloud(cloud: &PointCloud3, path: impl AsRef<Path>) -> Result<(), GridError> {
    std::fs::write(path, cloud_to_string(cloud))?;
    Ok(())
}

pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud3, GridError> {
    cloud_from_string(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellIndex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_small_grid() {
        let g = OccupancyGrid::filled(2, 2, 0.25, Pose2::new(1.0, -2.0, 0.5), Cell::Free)
            .unwrap();
        let text = grid_to_string(&g);
        let back = grid_from_string(&text).unwrap();
        assert_eq!(back, g);
        // Canonical files round trip byte-identically.
        assert_eq!(grid_to_string(&back), text);
    }

    #[test]
    fn round_trip_random_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cells = (0..100 * 100)
            .map(|_| match rng.gen_range(0..3) {
                0 => Cell::Free,
                1 => Cell::Occupied,
                _ => Cell::Unknown,
            })
            .collect();
        let g = OccupancyGrid::new(100, 100, 0.05, Pose2::new(-3.0, 4.0, -1.25), cells)
            .unwrap();
        let back = grid_from_string(&grid_to_string(&g)).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn row_width_mismatch_names_the_row() {
        let text = "gridmap 1\nwidth 3 height 2 resolution 0.1 origin 0 0 0\n...\n....\n";
        match grid_from_string(text) {
            Err(GridError::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("row 1"), "message: {message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_glyph_rejected() {
        let text = "gridmap 1\nwidth 2 height 1 resolution 0.1 origin 0 0 0\n.x\n";
        match grid_from_string(text) {
            Err(GridError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains('x'));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_header_rejected() {
        assert!(grid_from_string("gridmap 2\n").is_err());
        assert!(grid_from_string("gridmap 1\nwidth 2 height\n").is_err());
    }

    #[test]
    fn file_round_trip_preserves_cells() {
        let dir = std::env::temp_dir().join("nav_core_grid_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.grid");
        let mut g =
            OccupancyGrid::filled(4, 3, 0.2, Pose2::identity(), Cell::Free).unwrap();
        g.set_cell(CellIndex::new(2, 1), Cell::Occupied).unwrap();
        g.set_cell(CellIndex::new(0, 2), Cell::Unknown).unwrap();
        save_grid(&g, &path).unwrap();
        assert_eq!(load_grid(&path).unwrap(), g);
    }

    #[test]
    fn cloud_parsing_with_comments() {
        let text = "# header comment\n1 2 3\n\n4 5 6 # trailing\n";
        let cloud = cloud_from_string(text).unwrap();
        assert_eq!(cloud.points, vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        assert!(cloud_from_string("1 2\n").is_err());
        assert!(cloud_from_string("1 2 nan\n").is_err());
    }
}
