//! 2D point-to-point ICP against the occupied cells of an occupancy map.

use super::EstimationError;
use crate::grid::OccupancyGrid;
use crate::se2::{normalize_angle, Pose2};

/// A planar laser scan in the body frame.
#[derive(Clone, Debug)]
pub struct LaserScan2 {
    pub points: Vec<(f64, f64)>,
    pub max_range: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct IcpConfig {
    pub max_iter: usize,
    /// Stop when the pose change per iteration falls below this.
    pub tol: f64,
    /// Correspondences farther than this are dropped.
    pub max_corr_dist: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            max_iter: 50,
            tol: 1e-4,
            max_corr_dist: 1.0,
        }
    }
}

/// Per-iteration residual diagnostics. The closed-form alignment minimizes
/// the sum of squared distances under fixed correspondences, so the RMS
/// residual satisfies `post <= pre` in every iteration.
#[derive(Clone, Copy, Debug)]
pub struct IcpIteration {
    pub rms_pre: f64,
    pub rms_post: f64,
    pub matched: usize,
}

/// Result of a scan-to-map registration: the body pose in the map frame
/// and the mean residual distance at convergence.
#[derive(Clone, Debug)]
pub struct IcpMatch {
    pub pose: Pose2,
    pub fitness: f64,
    pub iterations: Vec<IcpIteration>,
}

/// Bucketed nearest-neighbor lookup over target points; bucket edge equals
/// the correspondence gate so a 3x3 neighborhood covers every candidate.
struct BucketIndex {
    cell: f64,
    buckets: std::collections::HashMap<(i64, i64), Vec<usize>>,
    points: Vec<(f64, f64)>,
}

impl BucketIndex {
    fn build(points: Vec<(f64, f64)>, cell: f64) -> Self {
        let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> =
            std::collections::HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let key = ((p.0 / cell).floor() as i64, (p.1 / cell).floor() as i64);
            buckets.entry(key).or_default().push(i);
        }
        BucketIndex {
            cell,
            buckets,
            points,
        }
    }

    /// Nearest target within `max_dist`; ties broken by lowest index so the
    /// result does not depend on hash order.
    fn nearest(&self, q: (f64, f64), max_dist: f64) -> Option<(usize, f64)> {
        let kx = (q.0 / self.cell).floor() as i64;
        let ky = (q.1 / self.cell).floor() as i64;
        let mut best: Option<(usize, f64)> = None;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &i in ids {
                        let p = self.points[i];
                        let d = (p.0 - q.0).hypot(p.1 - q.1);
                        let better = match best {
                            None => d <= max_dist,
                            Some((bi, bd)) => d < bd - 1e-15 || (d <= bd + 1e-15 && i < bi),
                        };
                        if better && d <= max_dist {
                            best = Some((i, d));
                        }
                    }
                }
            }
        }
        best
    }
}

fn mean_residual(pose: &Pose2, pairs: &[((f64, f64), (f64, f64))]) -> f64 {
    let sum: f64 = pairs
        .iter()
        .map(|(a, b)| {
            let (px, py) = pose.transform_point(a.0, a.1);
            (px - b.0).hypot(py - b.1)
        })
        .sum();
    sum / pairs.len() as f64
}

fn rms_residual(pose: &Pose2, pairs: &[((f64, f64), (f64, f64))]) -> f64 {
    let sum: f64 = pairs
        .iter()
        .map(|(a, b)| {
            let (px, py) = pose.transform_point(a.0, a.1);
            (px - b.0).powi(2) + (py - b.1).powi(2)
        })
        .sum();
    (sum / pairs.len() as f64).sqrt()
}

/// Register a body-frame scan against the occupied cell centers of a map.
///
/// `init` is the initial guess of the body pose in the map frame. Each
/// iteration matches transformed scan points to their nearest occupied cell
/// centers within `max_corr_dist` and solves the closed-form SE(2)
/// alignment (centroids plus the angle of the 2x2 cross-covariance),
/// stopping when the pose change drops below `tol`.
pub fn icp_scan_to_map(
    scan: &LaserScan2,
    grid: &OccupancyGrid,
    init: Pose2,
    cfg: &IcpConfig,
) -> Result<IcpMatch, EstimationError> {
    if scan.points.is_empty() {
        return Err(EstimationError::DegenerateMatch("empty scan".into()));
    }
    let targets = grid.occupied_cell_centers();
    if targets.is_empty() {
        return Err(EstimationError::DegenerateMatch(
            "map has no occupied cells".into(),
        ));
    }
    let index = BucketIndex::build(targets, cfg.max_corr_dist.max(1e-6));

    let mut pose = init;
    let mut iterations = Vec::new();
    for _ in 0..cfg.max_iter {
        // Correspondences under the current pose.
        let mut pairs: Vec<((f64, f64), (f64, f64))> = Vec::new();
        for &a in &scan.points {
            let q = pose.transform_point(a.0, a.1);
            if let Some((i, _)) = index.nearest(q, cfg.max_corr_dist) {
                pairs.push((a, index.points[i]));
            }
        }
        if pairs.len() < 3 {
            return Err(EstimationError::DegenerateMatch(format!(
                "only {} correspondences within {}",
                pairs.len(),
                cfg.max_corr_dist
            )));
        }

        let rms_pre = rms_residual(&pose, &pairs);

        // Closed-form alignment of body points onto their matched targets.
        let n = pairs.len() as f64;
        let (mut ax, mut ay, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0);
        for ((sax, say), (sbx, sby)) in &pairs {
            ax += sax;
            ay += say;
            bx += sbx;
            by += sby;
        }
        let (ax, ay, bx, by) = (ax / n, ay / n, bx / n, by / n);
        let (mut dot, mut cross) = (0.0, 0.0);
        for ((pax, pay), (pbx, pby)) in &pairs {
            let (cax, cay) = (pax - ax, pay - ay);
            let (cbx, cby) = (pbx - bx, pby - by);
            dot += cax * cbx + cay * cby;
            cross += cax * cby - cay * cbx;
        }
        let theta = cross.atan2(dot);
        let (sin_t, cos_t) = theta.sin_cos();
        let next = Pose2::new(
            bx - (cos_t * ax - sin_t * ay),
            by - (sin_t * ax + cos_t * ay),
            theta,
        );

        let rms_post = rms_residual(&next, &pairs);
        iterations.push(IcpIteration {
            rms_pre,
            rms_post,
            matched: pairs.len(),
        });

        let change = (next.x - pose.x)
            .abs()
            .max((next.y - pose.y).abs())
            .max(normalize_angle(next.theta() - pose.theta()).abs());
        pose = next;
        if change < cfg.tol {
            break;
        }
    }

    // Fitness from a final correspondence pass under the converged pose.
    let mut pairs: Vec<((f64, f64), (f64, f64))> = Vec::new();
    for &a in &scan.points {
        let q = pose.transform_point(a.0, a.1);
        if let Some((i, _)) = index.nearest(q, cfg.max_corr_dist) {
            pairs.push((a, index.points[i]));
        }
    }
    if pairs.len() < 3 {
        return Err(EstimationError::DegenerateMatch(
            "match collapsed after refinement".into(),
        ));
    }
    let fitness = mean_residual(&pose, &pairs);

    Ok(IcpMatch {
        pose,
        fitness,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, CellIndex};

    /// An asymmetric 4m x 3m room at resolution `p`: border walls, an
    /// interior L, a diagonal wall, and a column.
    fn fixture_map(p: f64) -> OccupancyGrid {
        let scale = (0.1 / p).round() as usize;
        let (w, h) = (40 * scale, 30 * scale);
        let mut g = OccupancyGrid::filled(w, h, p, Pose2::identity(), Cell::Free).unwrap();
        let mut set = |c: usize, r: usize| {
            g.set_cell(CellIndex::new(c, r), Cell::Occupied).unwrap();
        };
        for col in 0..w {
            set(col, 0);
            set(col, h - 1);
        }
        for row in 0..h {
            set(0, row);
            set(w - 1, row);
        }
        for col in 10 * scale..25 * scale {
            set(col, 12 * scale);
        }
        for row in 12 * scale..22 * scale {
            set(24 * scale, row);
        }
        for i in 0..12 * scale {
            set(5 * scale + i, 18 * scale + i / 2);
        }
        for dc in 0..scale {
            for dr in 0..scale {
                set(32 * scale + dc, 7 * scale + dr);
            }
        }
        g
    }

    /// Synthesize a scan by collecting occupied cell centers within range
    /// of the pose, expressed in the body frame.
    fn synthesize_scan(grid: &OccupancyGrid, pose: &Pose2, range: f64) -> LaserScan2 {
        let points = grid
            .occupied_cell_centers()
            .into_iter()
            .filter(|&(x, y)| (x - pose.x).hypot(y - pose.y) <= range)
            .map(|(x, y)| pose.inverse_transform_point(x, y))
            .collect();
        LaserScan2 {
            points,
            max_range: range,
        }
    }

    #[test]
    fn aligned_scan_returns_init() {
        let grid = fixture_map(0.1);
        let truth = Pose2::new(1.6, 1.1, 0.4);
        let scan = synthesize_scan(&grid, &truth, 2.5);
        let m = icp_scan_to_map(&scan, &grid, truth, &IcpConfig::default()).unwrap();
        assert!((m.pose.x - truth.x).abs() < 1e-9);
        assert!((m.pose.y - truth.y).abs() < 1e-9);
        assert!((m.pose.theta() - truth.theta()).abs() < 1e-9);
        assert!(m.fitness <= grid.resolution() / 2.0);
    }

    #[test]
    fn recovers_perturbed_initial_guess() {
        let grid = fixture_map(0.025);
        let truth = Pose2::new(1.8, 1.4, 0.3);
        let scan = synthesize_scan(&grid, &truth, 3.0);
        let init = Pose2::new(
            truth.x + 0.2,
            truth.y + 0.1,
            truth.theta() + 5.0_f64.to_radians(),
        );
        let m = icp_scan_to_map(&scan, &grid, init, &IcpConfig::default()).unwrap();
        assert!((m.pose.x - truth.x).abs() < 0.05, "x err {}", m.pose.x - truth.x);
        assert!((m.pose.y - truth.y).abs() < 0.05, "y err {}", m.pose.y - truth.y);
        assert!(
            normalize_angle(m.pose.theta() - truth.theta()).abs() < 1.0_f64.to_radians(),
            "theta err {}",
            m.pose.theta() - truth.theta()
        );
    }

    #[test]
    fn residual_non_increasing_within_iterations() {
        let grid = fixture_map(0.05);
        let truth = Pose2::new(2.2, 1.2, -0.2);
        let scan = synthesize_scan(&grid, &truth, 3.0);
        let init = Pose2::new(truth.x - 0.15, truth.y + 0.12, truth.theta() + 0.08);
        let m = icp_scan_to_map(&scan, &grid, init, &IcpConfig::default()).unwrap();
        assert!(!m.iterations.is_empty());
        for it in &m.iterations {
            assert!(
                it.rms_post <= it.rms_pre + 1e-12,
                "alignment increased the residual: {} -> {}",
                it.rms_pre,
                it.rms_post
            );
        }
    }

    #[test]
    fn empty_overlap_is_degenerate() {
        let grid = fixture_map(0.1);
        // A scan far outside the map cannot find correspondences.
        let scan = LaserScan2 {
            points: vec![(0.0, 0.0), (0.1, 0.0), (0.0, 0.1)],
            max_range: 5.0,
        };
        let far = Pose2::new(100.0, 100.0, 0.0);
        assert!(matches!(
            icp_scan_to_map(&scan, &grid, far, &IcpConfig::default()),
            Err(EstimationError::DegenerateMatch(_))
        ));

        let empty = LaserScan2 {
            points: vec![],
            max_range: 5.0,
        };
        assert!(matches!(
            icp_scan_to_map(&empty, &grid, Pose2::identity(), &IcpConfig::default()),
            Err(EstimationError::DegenerateMatch(_))
        ));
    }
}
