//! Run artifacts: per-tick CSV, summary CSV, estimation log, and SVG plots.

use crate::scenario::RunLog;
use crate::SimError;
use std::fmt::Write as _;
use std::path::Path;

/// Write `run.csv`, `summary.csv`, `est.csv`, `trajectory.svg` and
/// `solver_time.svg` into `out_dir` (created if missing).
pub fn emit_report(log: &RunLog, out_dir: impl AsRef<Path>) -> Result<(), SimError> {
    if log.records.is_empty() {
        return Err(SimError::Report("run log has no records".into()));
    }
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("run.csv"), run_csv(log))?;
    std::fs::write(dir.join("summary.csv"), summary_csv(log))?;
    std::fs::write(dir.join("est.csv"), estimation_csv(log))?;
    std::fs::write(dir.join("trajectory.svg"), trajectory_svg(log))?;
    std::fs::write(dir.join("solver_time.svg"), solver_time_svg(log))?;
    Ok(())
}

pub fn run_csv(log: &RunLog) -> String {
    let mut s = String::from(
        "t,x_true,y_true,theta_true,x_est,y_est,theta_est,x_ref,y_ref,theta_ref,\
v_cmd,omega_cmd,delta_cmd,solver_ms\n",
    );
    for r in &log.records {
        let _ = writeln!(
            s,
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            r.t,
            r.truth.x,
            r.truth.y,
            r.truth.theta(),
            r.est.x,
            r.est.y,
            r.est.theta(),
            r.reference.x,
            r.reference.y,
            r.reference.theta(),
            r.cmd_v,
            r.cmd_omega,
            r.cmd_delta,
            r.solver_ms
        );
    }
    s
}

/// Estimation log: `t,x_est,y_est,theta_est,v_est,omega_est,x_true,y_true,theta_true`.
pub fn estimation_csv(log: &RunLog) -> String {
    let mut s = String::from("t,x_est,y_est,theta_est,v_est,omega_est,x_true,y_true,theta_true\n");
    for r in &log.records {
        let _ = writeln!(
            s,
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            r.t,
            r.est.x,
            r.est.y,
            r.est.theta(),
            r.v_est,
            r.omega_est,
            r.truth.x,
            r.truth.y,
            r.truth.theta()
        );
    }
    s
}

pub fn summary_csv(log: &RunLog) -> String {
    let sm = &log.summary;
    let mut s = String::from("metric,value\n");
    let _ = writeln!(s, "rmse_m,{:.8e}", sm.rmse);
    let _ = writeln!(s, "solver_mean_ms,{:.8e}", sm.solver_mean_ms);
    let _ = writeln!(s, "solver_median_ms,{:.8e}", sm.solver_median_ms);
    let _ = writeln!(s, "solver_p95_ms,{:.8e}", sm.solver_p95_ms);
    let _ = writeln!(s, "solver_max_ms,{:.8e}", sm.solver_max_ms);
    let _ = writeln!(s, "ticks,{}", log.records.len());
    let _ = writeln!(s, "completed,{}", sm.completed);
    let _ = writeln!(s, "collided,{}", sm.collided);
    if let Some(goal) = sm.goal_reached {
        let _ = writeln!(s, "goal_reached,{goal}");
    }
    s
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 480.0;
const MARGIN: f64 = 45.0;

fn map_points(points: &[(f64, f64)], bbox: (f64, f64, f64, f64)) -> String {
    let (min_x, min_y, max_x, max_y) = bbox;
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let scale = ((PLOT_W - 2.0 * MARGIN) / span_x).min((PLOT_H - 2.0 * MARGIN) / span_y);
    let mut s = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let px = MARGIN + (x - min_x) * scale;
        let py = PLOT_H - MARGIN - (y - min_y) * scale;
        let _ = write!(s, "{px:.2},{py:.2}");
    }
    s
}

/// Reference path (blue) against the executed path (red).
pub fn trajectory_svg(log: &RunLog) -> String {
    let reference: Vec<(f64, f64)> = log
        .records
        .iter()
        .map(|r| (r.reference.x, r.reference.y))
        .collect();
    let actual: Vec<(f64, f64)> = log.records.iter().map(|r| (r.truth.x, r.truth.y)).collect();
    let mut bbox = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in reference.iter().chain(&actual) {
        bbox.0 = bbox.0.min(x);
        bbox.1 = bbox.1.min(y);
        bbox.2 = bbox.2.max(x);
        bbox.3 = bbox.3.max(y);
    }
    let mut s = String::new();
    let _ = writeln!(s, r##"<?xml version="1.0" encoding="UTF-8"?>"##);
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"##
    );
    let _ = writeln!(
        s,
        r##"<rect x="0" y="0" width="{PLOT_W}" height="{PLOT_H}" fill="white" stroke="none"/>"##
    );
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#1f5fbf" stroke-width="1.8" points="{}"/>"##,
        map_points(&reference, bbox)
    );
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#c03030" stroke-width="1.2" points="{}"/>"##,
        map_points(&actual, bbox)
    );
    let _ = writeln!(
        s,
        r##"<text x="{MARGIN}" y="22" font-family="monospace" font-size="13" fill="#1f5fbf">reference</text>"##
    );
    let _ = writeln!(
        s,
        r##"<text x="{}" y="22" font-family="monospace" font-size="13" fill="#c03030">executed (rmse {:.4} m)</text>"##,
        MARGIN + 110.0,
        log.summary.rmse
    );
    let _ = writeln!(s, "</svg>");
    s
}

/// Axis-independent mapping for time-series plots.
fn map_series(points: &[(f64, f64)], bbox: (f64, f64, f64, f64)) -> String {
    let (min_x, min_y, max_x, max_y) = bbox;
    let sx = (PLOT_W - 2.0 * MARGIN) / (max_x - min_x).max(1e-9);
    let sy = (PLOT_H - 2.0 * MARGIN) / (max_y - min_y).max(1e-9);
    let mut s = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(
            s,
            "{:.2},{:.2}",
            MARGIN + (x - min_x) * sx,
            PLOT_H - MARGIN - (y - min_y) * sy
        );
    }
    s
}

/// Per-tick controller solve time with the 30 Hz (33.3 ms) budget line.
pub fn solver_time_svg(log: &RunLog) -> String {
    let budget = 1000.0 / 30.0;
    let times: Vec<(f64, f64)> = log
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (i as f64, r.solver_ms))
        .collect();
    let max_ms = times
        .iter()
        .map(|&(_, v)| v)
        .fold(budget, f64::max)
        .max(1e-3);
    let bbox = (0.0, 0.0, (times.len().max(2) - 1) as f64, max_ms * 1.1);
    let sy = (PLOT_H - 2.0 * MARGIN) / (bbox.3 - bbox.1).max(1e-9);
    let budget_y = PLOT_H - MARGIN - budget * sy;
    let mut s = String::new();
    let _ = writeln!(s, r##"<?xml version="1.0" encoding="UTF-8"?>"##);
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"##
    );
    let _ = writeln!(
        s,
        r##"<rect x="0" y="0" width="{PLOT_W}" height="{PLOT_H}" fill="white" stroke="none"/>"##
    );
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#2a7d2a" stroke-width="1.0" points="{}"/>"##,
        map_series(&times, bbox)
    );
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{budget_y:.2}" x2="{:.2}" y2="{budget_y:.2}" stroke="#c03030" stroke-width="1.2" stroke-dasharray="6 4"/>"##,
        PLOT_W - MARGIN
    );
    let _ = writeln!(
        s,
        r##"<text x="{MARGIN}" y="22" font-family="monospace" font-size="13" fill="#2a7d2a">solve time per tick (ms), budget 33.3 ms dashed</text>"##
    );
    let _ = writeln!(s, "</svg>");
    s
}
