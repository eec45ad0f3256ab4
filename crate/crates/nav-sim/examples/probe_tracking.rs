// scratch probe: noise-level sweep at default weights
use nav_sim::experiments::run_tracking_experiment;
use nav_sim::scenario::{ScenarioConfig, TrajectoryKind};

fn main() {
    let seeds = 5u64;
    for (sxy, sth) in [
        (0.02, 0.01),
        (0.05, 0.03),
        (0.08, 0.05),
        (0.05, 0.05),
        (0.08, 0.03),
    ] {
        print!("sxy {sxy:<5} sth {sth:<5}| ");
        for kind in [
            ("lemn", TrajectoryKind::Lemniscate { half_width: 4.0 }),
            ("sqr", TrajectoryKind::Square { side: 6.0, corner_radius: 0.8 }),
        ] {
            let mut wins = 0;
            let mut sum_ratio = 0.0;
            let mut rms = (0.0, 0.0);
            for seed in 1..=seeds {
                let mut res = Vec::new();
                for ctrl in ["mpc", "agmpc"] {
                    let mut sc = ScenarioConfig::new(kind.1, ctrl, 1.1, seed);
                    sc.noise.sigma_xy = sxy;
                    sc.noise.sigma_theta = sth;
                    res.push(run_tracking_experiment(&sc).unwrap().summary.rmse);
                }
                if res[1] < res[0] {
                    wins += 1;
                }
                sum_ratio += res[1] / res[0];
                rms.0 += res[0] / seeds as f64;
                rms.1 += res[1] / seeds as f64;
            }
            print!(
                "{} {wins}/{seeds} r{:.2} (m{:.3} a{:.3})  ",
                kind.0,
                sum_ratio / seeds as f64,
                rms.0,
                rms.1
            );
        }
        println!();
    }
}
