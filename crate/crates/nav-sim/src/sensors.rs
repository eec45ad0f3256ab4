//! Deterministic sensor synthesis: scan odometry, wheel odometry, IMU yaw
//! rate, and ray-cast laser scans, all driven by one seeded RNG on a fixed
//! schedule so identical seeds give identical streams.

use crate::plant::BicycleState;
use nav_core::estimation::{LaserScan2, Measurement, MeasurementKind};
use nav_core::grid::{Cell, OccupancyGrid};
use nav_core::se2::Pose2;
use nalgebra::{Matrix2, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Noise magnitudes (standard deviations) and odometry drift rates.
#[derive(Clone, Copy, Debug)]
pub struct NoiseConfig {
    pub sigma_xy: f64,
    pub sigma_theta: f64,
    pub sigma_v: f64,
    pub sigma_omega: f64,
    pub sigma_imu: f64,
    pub sigma_range: f64,
    /// Random-walk drift of the odom frame, per sqrt(second).
    pub drift_xy: f64,
    pub drift_theta: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_xy: 0.02,
            sigma_theta: 0.01,
            sigma_v: 0.03,
            sigma_omega: 0.03,
            sigma_imu: 0.02,
            sigma_range: 0.01,
            drift_xy: 0.0,
            drift_theta: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn zero() -> Self {
        NoiseConfig {
            sigma_xy: 0.0,
            sigma_theta: 0.0,
            sigma_v: 0.0,
            sigma_omega: 0.0,
            sigma_imu: 0.0,
            sigma_range: 0.0,
            drift_xy: 0.0,
            drift_theta: 0.0,
        }
    }

    pub fn scaled_scan_odom(mut self, factor: f64) -> Self {
        self.sigma_xy *= factor;
        self.sigma_theta *= factor;
        self
    }
}

/// Measurement covariance floor, so exact sensors still yield a solvable
/// Kalman update.
const VAR_FLOOR: f64 = 1e-9;

/// Simulation and sensor schedule, all divisors of the micro-step rate.
#[derive(Clone, Copy, Debug)]
pub struct Schedule {
    /// Micro-steps per second (plant integration rate).
    pub micro_rate: usize,
    pub control_every: usize,
    pub wheel_every: usize,
    pub imu_every: usize,
    pub scan_every: usize,
    pub icp_every: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        // 300 Hz plant, 30 Hz control, 100 Hz wheel/IMU, 10 Hz scans,
        // 2 Hz map corrections.
        Schedule {
            micro_rate: 300,
            control_every: 10,
            wheel_every: 3,
            imu_every: 3,
            scan_every: 30,
            icp_every: 150,
        }
    }
}

impl Schedule {
    pub fn micro_dt(&self) -> f64 {
        1.0 / self.micro_rate as f64
    }
}

/// Incremental sensor source polled once per micro-step.
pub struct SensorSim {
    rng: ChaCha8Rng,
    noise: NoiseConfig,
    schedule: Schedule,
    n_beams: usize,
    max_range: f64,
}

impl SensorSim {
    pub fn new(seed: u64, noise: NoiseConfig, schedule: Schedule) -> Self {
        SensorSim {
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise,
            schedule,
            n_beams: 360,
            max_range: 12.0,
        }
    }

    fn gauss(&mut self, sigma: f64) -> f64 {
        // Draw unconditionally so the stream stays aligned across configs.
        let n = Normal::new(0.0, 1.0).unwrap();
        n.sample(&mut self.rng) * sigma
    }

    /// Measurements due at micro-step `index`. `local_pose` is the true
    /// pose expressed in the odom frame (equal to the map pose when the
    /// odom frame does not drift).
    pub fn poll(
        &mut self,
        index: usize,
        t: f64,
        local_pose: &Pose2,
        truth: &BicycleState,
        wheelbase: f64,
    ) -> Vec<Measurement> {
        let mut out = Vec::new();
        if index % self.schedule.wheel_every == 0 {
            let v = truth.v_actual + self.gauss(self.noise.sigma_v);
            let omega = truth.omega(wheelbase) + self.gauss(self.noise.sigma_omega);
            let var_v = (self.noise.sigma_v * self.noise.sigma_v).max(VAR_FLOOR);
            let var_w = (self.noise.sigma_omega * self.noise.sigma_omega).max(VAR_FLOOR);
            out.push(Measurement {
                kind: MeasurementKind::WheelOdom {
                    v,
                    omega,
                    noise: Matrix2::from_diagonal(&nalgebra::Vector2::new(var_v, var_w)),
                },
                stamp: t,
            });
        }
        if index % self.schedule.imu_every == 0 {
            let omega = truth.omega(wheelbase) + self.gauss(self.noise.sigma_imu);
            out.push(Measurement {
                kind: MeasurementKind::ImuYaw {
                    omega,
                    noise: (self.noise.sigma_imu * self.noise.sigma_imu).max(VAR_FLOOR),
                },
                stamp: t,
            });
        }
        if index % self.schedule.scan_every == 0 {
            let pose = Pose2::new(
                local_pose.x + self.gauss(self.noise.sigma_xy),
                local_pose.y + self.gauss(self.noise.sigma_xy),
                local_pose.theta() + self.gauss(self.noise.sigma_theta),
            );
            let var_xy = (self.noise.sigma_xy * self.noise.sigma_xy).max(VAR_FLOOR);
            let var_th = (self.noise.sigma_theta * self.noise.sigma_theta).max(VAR_FLOOR);
            out.push(Measurement {
                kind: MeasurementKind::ScanOdom {
                    pose,
                    noise: Matrix3::from_diagonal(&nalgebra::Vector3::new(
                        var_xy, var_xy, var_th,
                    )),
                },
                stamp: t,
            });
        }
        out
    }

    /// Odom-frame drift increment accumulated at the scan-odometry rate.
    pub fn drift_increment(&mut self) -> Pose2 {
        let dt = self.schedule.scan_every as f64 * self.schedule.micro_dt();
        let scale = dt.sqrt();
        Pose2::new(
            self.gauss(self.noise.drift_xy) * scale,
            self.gauss(self.noise.drift_xy) * scale,
            self.gauss(self.noise.drift_theta) * scale,
        )
    }

    /// Ray-cast a 360 degree scan of `grid` from the true pose. Beams that
    /// hit nothing within range are dropped; noise is drawn for every beam
    /// regardless so the stream stays aligned.
    pub fn scan(&mut self, grid: &OccupancyGrid, truth_pose: &Pose2) -> LaserScan2 {
        let mut points = Vec::new();
        for b in 0..self.n_beams {
            let noise = self.gauss(self.noise.sigma_range);
            let phi = 2.0 * std::f64::consts::PI * b as f64 / self.n_beams as f64;
            let angle = truth_pose.theta() + phi;
            if let Some(range) = ray_cast(grid, truth_pose.x, truth_pose.y, angle, self.max_range)
            {
                let r = (range + noise).clamp(0.0, self.max_range);
                points.push((r * phi.cos(), r * phi.sin()));
            }
        }
        LaserScan2 {
            points,
            max_range: self.max_range,
        }
    }
}

/// Distance along the ray from (x, y) at `angle` to the first occupied cell
/// boundary, via grid traversal (Amanatides & Woo). Unknown cells do not
/// reflect.
pub fn ray_cast(grid: &OccupancyGrid, x: f64, y: f64, angle: f64, max_range: f64) -> Option<f64> {
    let origin = grid.origin();
    let p = grid.resolution();
    // Work in the grid frame.
    let (gx, gy) = origin.inverse_transform_point(x, y);
    let dir_world = (angle.cos(), angle.sin());
    let (s, c) = origin.theta().sin_cos();
    let dir = (
        c * dir_world.0 + s * dir_world.1,
        -s * dir_world.0 + c * dir_world.1,
    );

    let mut col = (gx / p).floor() as i64;
    let mut row = (gy / p).floor() as i64;
    let step_c: i64 = if dir.0 > 0.0 { 1 } else { -1 };
    let step_r: i64 = if dir.1 > 0.0 { 1 } else { -1 };
    let next_boundary = |cell: i64, step: i64| {
        if step > 0 {
            (cell + 1) as f64 * p
        } else {
            cell as f64 * p
        }
    };
    let mut t_max_c = if dir.0.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (next_boundary(col, step_c) - gx) / dir.0
    };
    let mut t_max_r = if dir.1.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (next_boundary(row, step_r) - gy) / dir.1
    };
    let t_delta_c = if dir.0.abs() < 1e-15 {
        f64::INFINITY
    } else {
        p / dir.0.abs()
    };
    let t_delta_r = if dir.1.abs() < 1e-15 {
        f64::INFINITY
    } else {
        p / dir.1.abs()
    };

    let mut t = 0.0;
    loop {
        if col < 0 || row < 0 || col >= grid.width() as i64 || row >= grid.height() as i64 {
            return None;
        }
        if grid.cell_unchecked(col as usize, row as usize) == Cell::Occupied && t > 0.0 {
            return Some(t);
        }
        if t_max_c < t_max_r {
            t = t_max_c;
            t_max_c += t_delta_c;
            col += step_c;
        } else {
            t = t_max_r;
            t_max_r += t_delta_r;
            row += step_r;
        }
        if t > max_range {
            return None;
        }
    }
}

/// Batch synthesis over a recorded truth history (one state per
/// micro-step): the full measurement stream and the scans, labeled with
/// their micro-step indices. Identical seeds give identical streams.
pub fn synthesize_sensors(
    history: &[BicycleState],
    noise: NoiseConfig,
    schedule: Schedule,
    seed: u64,
    wheelbase: f64,
    grid: Option<&OccupancyGrid>,
) -> (Vec<(usize, Measurement)>, Vec<(usize, LaserScan2)>) {
    let mut sim = SensorSim::new(seed, noise, schedule);
    let mut measurements = Vec::new();
    let mut scans = Vec::new();
    for (index, truth) in history.iter().enumerate() {
        let t = index as f64 * schedule.micro_dt();
        for m in sim.poll(index, t, &truth.pose, truth, wheelbase) {
            measurements.push((index, m));
        }
        if index % schedule.scan_every == 0 {
            if let Some(g) = grid {
                scans.push((index, sim.scan(g, &truth.pose)));
            }
        }
    }
    (measurements, scans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nav_core::estimation::MeasurementKind;
    use nav_core::grid::CellIndex;

    fn demo_history(n: usize) -> Vec<BicycleState> {
        (0..n)
            .map(|i| BicycleState {
                pose: Pose2::new(i as f64 * 0.01, 0.0, 0.0),
                v_actual: 1.0,
                delta_actual: 0.1,
            })
            .collect()
    }

    #[test]
    fn zero_noise_measurements_equal_truth() {
        let history = demo_history(301);
        let (ms, _) = synthesize_sensors(
            &history,
            NoiseConfig::zero(),
            Schedule::default(),
            7,
            0.65,
            None,
        );
        for (idx, m) in &ms {
            match &m.kind {
                MeasurementKind::WheelOdom { v, omega, .. } => {
                    assert_eq!(*v, 1.0);
                    let expect = 1.0 * 0.1_f64.tan() / 0.65;
                    assert!((omega - expect).abs() < 1e-12);
                }
                MeasurementKind::ScanOdom { pose, .. } => {
                    assert_eq!(pose.x, history[*idx].pose.x);
                    assert_eq!(pose.y, 0.0);
                }
                MeasurementKind::ImuYaw { omega, .. } => {
                    let expect = 1.0 * 0.1_f64.tan() / 0.65;
                    assert!((omega - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fixed_seed_streams_are_bitwise_identical() {
        let history = demo_history(601);
        let run = || {
            synthesize_sensors(
                &history,
                NoiseConfig::default(),
                Schedule::default(),
                42,
                0.65,
                None,
            )
        };
        let (a, _) = run();
        let (b, _) = run();
        assert_eq!(a.len(), b.len());
        for ((ia, ma), (ib, mb)) in a.iter().zip(&b) {
            assert_eq!(ia, ib);
            match (&ma.kind, &mb.kind) {
                (
                    MeasurementKind::WheelOdom { v: va, omega: wa, .. },
                    MeasurementKind::WheelOdom { v: vb, omega: wb, .. },
                ) => {
                    assert_eq!(va.to_bits(), vb.to_bits());
                    assert_eq!(wa.to_bits(), wb.to_bits());
                }
                (
                    MeasurementKind::ScanOdom { pose: pa, .. },
                    MeasurementKind::ScanOdom { pose: pb, .. },
                ) => {
                    assert_eq!(pa.x.to_bits(), pb.x.to_bits());
                    assert_eq!(pa.theta().to_bits(), pb.theta().to_bits());
                }
                (
                    MeasurementKind::ImuYaw { omega: wa, .. },
                    MeasurementKind::ImuYaw { omega: wb, .. },
                ) => assert_eq!(wa.to_bits(), wb.to_bits()),
                _ => panic!("stream kinds diverged"),
            }
        }
    }

    #[test]
    fn ray_cast_hits_wall_at_known_distance() {
        let mut grid =
            OccupancyGrid::filled(60, 40, 0.1, Pose2::identity(), Cell::Free).unwrap();
        for row in 0..40 {
            grid.set_cell(CellIndex::new(45, row), Cell::Occupied).unwrap();
        }
        // The wall's near face is at x = 4.5.
        let d = ray_cast(&grid, 1.0, 2.0, 0.0, 12.0).unwrap();
        assert!((d - 3.5).abs() < 0.05);
        // Away from the wall: no hit.
        assert!(ray_cast(&grid, 1.0, 2.0, std::f64::consts::PI, 12.0).is_none());
    }

    #[test]
    fn scan_points_stay_within_range() {
        let mut grid =
            OccupancyGrid::filled(30, 30, 0.2, Pose2::identity(), Cell::Free).unwrap();
        for i in 0..30 {
            grid.set_cell(CellIndex::new(i, 0), Cell::Occupied).unwrap();
            grid.set_cell(CellIndex::new(i, 29), Cell::Occupied).unwrap();
            grid.set_cell(CellIndex::new(0, i), Cell::Occupied).unwrap();
            grid.set_cell(CellIndex::new(29, i), Cell::Occupied).unwrap();
        }
        let mut sim = SensorSim::new(3, NoiseConfig::default(), Schedule::default());
        let scan = sim.scan(&grid, &Pose2::new(3.0, 3.0, 0.7));
        assert!(!scan.points.is_empty());
        for (x, y) in &scan.points {
            assert!(x.hypot(*y) <= scan.max_range + 1e-9);
        }
    }
}
