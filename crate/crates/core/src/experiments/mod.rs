//! Experiment harness: periodic actuation, closed-loop quadrant reaching and
//! the numerical validation suite.

mod log;
mod periodic;
mod quadrant;
mod validate;

pub use log::{TrajectoryLog, HEADER};
pub use periodic::{dominant_period, run_periodic, PeriodicReport, PeriodicRun};
pub use quadrant::{quadrant_target, run_all_quadrants, run_quadrant, thread_limit, QuadrantReport, QuadrantRun};
pub use validate::{validate, validate_with, Check, Faults, ValidationReport};

use crate::error::Result;
use crate::scene::{Scene, StepRecord};

/// Runs up to `steps` animation steps and logs every `stride`-th record.
///
/// Row k holds the tip at t_k and the pressures applied from t_k on, so a
/// full run has `steps / stride + 1` rows. `stop` may end the run early; the
/// stopping record is always logged.
pub fn simulate(
    scene: &mut Scene,
    steps: usize,
    stride: usize,
    mut stop: impl FnMut(&StepRecord) -> bool,
) -> Result<TrajectoryLog> {
    let mut log = TrajectoryLog::default();
    let stride = stride.max(1);
    for k in 0..=steps {
        let rec = scene.actuate();
        let last = k == steps || stop(&rec);
        if k % stride == 0 || last {
            log.push(rec);
        }
        if last {
            break;
        }
        scene.advance()?;
    }
    Ok(log)
}
