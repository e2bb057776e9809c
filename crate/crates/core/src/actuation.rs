//! Cavity pressure loads and open-loop pressure signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{triangle_area_normal, Point, TriGroup};

/// Uniform pressure acting on a closed, inward-wound triangle surface.
/// Triangle indices refer to the global node numbering of the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureCavity {
    pub name: String,
    pub triangles: Vec<[usize; 3]>,
    pub pressure: f64,
}

impl PressureCavity {
    /// Builds a cavity from a tri group of a body whose nodes start at `offset`.
    pub fn new(name: &str, group: &TriGroup, offset: usize) -> Result<Self> {
        group.check_closed().map_err(|reason| Error::OpenSurface {
            name: name.to_string(),
            reason,
        })?;
        Ok(PressureCavity {
            name: name.to_string(),
            triangles: group.triangles.iter().map(|t| t.map(|i| i + offset)).collect(),
            pressure: 0.0,
        })
    }

    /// Adds this cavity's nodal forces to `f`; returns the number of skipped
    /// degenerate triangles.
    pub fn add_forces(&self, q: &[Point], f: &mut [Point]) -> usize {
        add_pressure_forces(&self.triangles, q, self.pressure, f)
    }
}

/// Each triangle of current area A and unit normal n gives P·A·n/3 to each of
/// its nodes. Returns the number of degenerate triangles skipped.
pub fn add_pressure_forces(triangles: &[[usize; 3]], q: &[Point], pressure: f64, f: &mut [Point]) -> usize {
    let mut skipped = 0;
    for &tri in triangles {
        match triangle_area_normal(q, tri) {
            Ok((area, n)) => {
                let share = (pressure * area / 3.0) * n;
                for i in tri {
                    f[i] += share;
                }
            }
            Err(_) => skipped += 1,
        }
    }
    skipped
}

pub fn pressure_forces(triangles: &[[usize; 3]], q: &[Point], pressure: f64) -> (Vec<Point>, usize) {
    let mut f = vec![Point::zeros(); q.len()];
    let skipped = add_pressure_forces(triangles, q, pressure, &mut f);
    (f, skipped)
}

/// Antiphase sinusoids about a common offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodicSignalConfig {
    pub p0: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Default for PeriodicSignalConfig {
    fn default() -> Self {
        PeriodicSignalConfig {
            p0: 0.65,
            amplitude: 0.65,
            frequency: 0.05,
            phase: 0.0,
        }
    }
}

impl PeriodicSignalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.p0 - self.amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "periodic signal needs 0 <= amplitude <= p0 (p0 = {}, amplitude = {})",
                self.p0, self.amplitude
            )));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::InvalidParameter(format!("frequency must be positive, got {}", self.frequency)));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}

/// (P_left, P_right) = (P0 + A sin(2πft + φ), P0 − A sin(2πft + φ)).
///
/// The larger value is computed first and the smaller one as `2·P0 − larger`;
/// that subtraction is exact, so the two always sum to exactly `2·P0`.
pub fn periodic_pressures(t: f64, cfg: &PeriodicSignalConfig) -> (f64, f64) {
    let s = cfg.amplitude * (2.0 * std::f64::consts::PI * cfg.frequency * t + cfg.phase).sin();
    let hi = (cfg.p0 + s.abs()).min(2.0 * cfg.p0);
    let lo = 2.0 * cfg.p0 - hi;
    if s >= 0.0 {
        (hi, lo)
    } else {
        (lo, hi)
    }
}

/// Splits the merged pair pressures back onto the cavities: the left pair
/// (2, 4) shares P_left and the right pair (1, 3) shares P_right.
pub fn merge_cavities(p_left: f64, p_right: f64) -> [f64; 4] {
    let l = 0.5 * p_left;
    let r = 0.5 * p_right;
    [r, l, r, l]
}
