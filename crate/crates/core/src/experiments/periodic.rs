use crate::error::{Error, Result};
use crate::scene::{build_scene, ActuationMode, SceneConfig, SceneStats};

use super::{simulate, TrajectoryLog};

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicReport {
    /// Peak-to-peak tip displacement [m].
    pub delta_x: f64,
    pub delta_y: f64,
    pub delta_z: f64,
    /// Period of tip_y estimated from mean crossings [s]; None with fewer than two crossings.
    pub period: Option<f64>,
    pub p_left: (f64, f64),
    pub p_right: (f64, f64),
    pub stats: SceneStats,
}

#[derive(Debug, Clone)]
pub struct PeriodicRun {
    pub log: TrajectoryLog,
    pub report: PeriodicReport,
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Mean spacing between successive same-direction crossings of `y` through
/// its mid-range, with crossing times found by linear interpolation.
///
/// A crossing only counts once the signal has been more than a tenth of the
/// half-range away on the other side, so a trace that starts at rest near the
/// mid-range does not produce a spurious first crossing. Falls back to twice
/// the spacing of opposite crossings when no full cycle exists.
pub fn dominant_period(t: &[f64], y: &[f64]) -> Option<f64> {
    let (lo, hi) = range(y.iter().copied());
    if !(hi > lo) {
        return None;
    }
    let level = 0.5 * (lo + hi);
    let band = 0.05 * (hi - lo);
    let mut up = Vec::new();
    let mut down = Vec::new();
    // +1 after an excursion above the band, -1 below it
    let mut side = 0;
    let mut last_cross = None;
    for k in 0..y.len() {
        let b = y[k] - level;
        if k > 0 {
            let a = y[k - 1] - level;
            if (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0) {
                last_cross = Some(t[k - 1] + a / (a - b) * (t[k] - t[k - 1]));
            }
        }
        if b > band {
            if side == -1 {
                up.extend(last_cross);
            }
            side = 1;
        } else if b < -band {
            if side == 1 {
                down.extend(last_cross);
            }
            side = -1;
        }
    }
    let spacings: Vec<f64> = [&up, &down]
        .iter()
        .flat_map(|c| c.windows(2).map(|w| w[1] - w[0]))
        .collect();
    if !spacings.is_empty() {
        return Some(spacings.iter().sum::<f64>() / spacings.len() as f64);
    }
    match (up.first(), down.first()) {
        (Some(u), Some(d)) => Some(2.0 * (u - d).abs()),
        _ => None,
    }
}

pub fn run_periodic(cfg: &SceneConfig) -> Result<PeriodicRun> {
    if cfg.mode != ActuationMode::Periodic {
        return Err(Error::Config("run_periodic needs mode = \"periodic\"".into()));
    }
    let mut scene = build_scene(cfg)?;
    let log = simulate(&mut scene, cfg.steps(), cfg.log_stride, |_| false)?;
    let col = |k: usize| log.rows.iter().map(move |r| r.tip[k]);
    let span = |(lo, hi): (f64, f64)| hi - lo;
    let t: Vec<f64> = log.rows.iter().map(|r| r.t).collect();
    let y: Vec<f64> = col(1).collect();
    let report = PeriodicReport {
        delta_x: span(range(col(0))),
        delta_y: span(range(col(1))),
        delta_z: span(range(col(2))),
        period: dominant_period(&t, &y),
        p_left: range(log.rows.iter().map(|r| r.pressures[1] + r.pressures[3])),
        p_right: range(log.rows.iter().map(|r| r.pressures[0] + r.pressures[2])),
        stats: scene.stats,
    };
    Ok(PeriodicRun { log, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_of_a_sampled_sine() {
        let t: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.01).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.3 + (2.0 * std::f64::consts::PI * t / 20.0 - 0.4).sin()).collect();
        let p = dominant_period(&t, &y).unwrap();
        assert!((p - 20.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn start_at_rest_does_not_bias_the_period() {
        // lopsided waveform from rest: the mid-range sits above the start value
        let t: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.01).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|t| {
                let s = (2.0 * std::f64::consts::PI * t / 20.0).sin();
                s + 0.2 * s * s
            })
            .collect();
        let p = dominant_period(&t, &y).unwrap();
        assert!((p - 20.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn flat_signal_has_no_period() {
        assert_eq!(dominant_period(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]), None);
        assert_eq!(dominant_period(&[], &[]), None);
    }

    #[test]
    fn wrong_mode_is_a_config_error() {
        let err = run_periodic(&SceneConfig::default()).unwrap_err();
        assert!(err.is_config_error());
    }
}
