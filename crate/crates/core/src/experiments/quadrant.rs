use nalgebra::Vector3;

use crate::controller::DEMAND_MATRIX;
use crate::error::{Error, Result};
use crate::scene::{build_scene, ActuationMode, SceneConfig, SceneStats};

use super::{simulate, TrajectoryLog};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadrantReport {
    pub quadrant: usize,
    pub target: [f64; 3],
    pub final_tip: [f64; 3],
    pub final_pressures: [f64; 4],
    pub initial_error: f64,
    pub final_error: f64,
    /// First time after which e_k stays at or below 10 % of its initial value.
    pub settling_time: Option<f64>,
    /// True when the run stopped before the duration cap, either below the
    /// stop threshold or at a controller fixed point.
    pub converged: bool,
    /// True when it stopped at a fixed point with e_k above the threshold.
    pub stalled: bool,
    pub duration: f64,
    pub pressures_in_bounds: bool,
    pub stats: SceneStats,
}

#[derive(Debug, Clone)]
pub struct QuadrantRun {
    pub log: TrajectoryLog,
    pub report: QuadrantReport,
}

/// Target displacement for quadrant `q` (1..=4): cavity q pushes the tip
/// toward the quadrant diagonally opposite to it.
pub fn quadrant_target(q: usize, cfg: &SceneConfig) -> Result<[f64; 3]> {
    if !(1..=4).contains(&q) {
        return Err(Error::Config(format!("quadrant must be 1..=4, got {q}")));
    }
    let row = DEMAND_MATRIX[q - 1];
    let t = cfg.quadrant;
    Ok([t.target_x, row[1] * t.target_y, row[2] * t.target_z])
}

/// Closed-loop reaching run. `target` overrides the quadrant's default target.
pub fn run_quadrant(cfg: &SceneConfig, q: usize, target: Option<[f64; 3]>) -> Result<QuadrantRun> {
    let mut cfg = cfg.clone();
    cfg.mode = ActuationMode::Controller;
    cfg.target = match target {
        Some(t) => t,
        None => quadrant_target(q, &cfg)?,
    };
    let mut scene = build_scene(&cfg)?;
    let stop_error = cfg.quadrant.stop_error.unwrap_or(cfg.controller.deadband_units());
    let stall_time = cfg.quadrant.stall_time;
    let mut changed_at = 0.0;
    let mut previous = None;
    let mut stalled = false;
    let log = simulate(&mut scene, cfg.steps(), cfg.log_stride, |r| {
        if previous != Some(r.pressures) {
            changed_at = r.t;
            previous = Some(r.pressures);
        }
        stalled = stall_time > 0.0 && r.t - changed_at >= stall_time;
        r.e_k.is_some_and(|e| e < stop_error) || stalled
    })?;

    let errors: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.t, r.e_k.unwrap_or(0.0))).collect();
    let initial_error = errors.first().map_or(0.0, |e| e.1);
    let last = *log.last().expect("a run logs at least one row");
    let final_error = last.e_k.unwrap_or(0.0);
    let settling_time = {
        let limit = 0.1 * initial_error;
        match errors.iter().rposition(|e| e.1 > limit) {
            None => Some(0.0),
            Some(k) if k + 1 < errors.len() => Some(errors[k + 1].0),
            Some(_) => None,
        }
    };
    let (lo, hi) = (cfg.controller.p_min, cfg.controller.p_max);
    let pressures_in_bounds = log.rows.iter().all(|r| r.pressures.iter().all(|p| (lo..=hi).contains(p)));
    let report = QuadrantReport {
        quadrant: q,
        target: cfg.target,
        final_tip: last.tip,
        final_pressures: last.pressures,
        initial_error,
        final_error,
        settling_time,
        converged: final_error < stop_error || stalled,
        stalled: stalled && final_error >= stop_error,
        duration: last.t,
        pressures_in_bounds,
        stats: scene.stats,
    };
    Ok(QuadrantRun { log, report })
}

/// Worker count from `SOFTARM_THREADS`, else the available parallelism.
pub fn thread_limit() -> usize {
    std::env::var("SOFTARM_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs the four quadrants on at most `threads` threads; results are in quadrant order.
pub fn run_all_quadrants(cfg: &SceneConfig, threads: usize) -> Vec<Result<QuadrantRun>> {
    let threads = threads.clamp(1, 4);
    let mut out: Vec<Option<Result<QuadrantRun>>> = (0..4).map(|_| None).collect();
    for chunk in (1..=4usize).collect::<Vec<_>>().chunks(threads) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&q| (q, s.spawn(move || run_quadrant(cfg, q, None))))
                .collect();
            for (q, h) in handles {
                out[q - 1] = Some(h.join().expect("quadrant worker panicked"));
            }
        });
    }
    out.into_iter().map(|r| r.expect("every quadrant ran")).collect()
}

impl QuadrantReport {
    pub fn target_vector(&self) -> Vector3<f64> {
        Vector3::from(self.target)
    }
}
