//! Error-based PI cavity-pressure controller.
//!
//! Positions enter in meters. The error is converted to the configured
//! working unit before the demand map, so gains and the logged `e_k`, `u_k`
//! are in working units.

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Demand map rows: cavity i responds to e_x + a_i e_y + b_i e_z.
pub const DEMAND_MATRIX: [[f64; 3]; 4] = [
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub kp: f64,
    pub ki: f64,
    /// Demand threshold in meters.
    pub deadband: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Control period in seconds.
    pub dt: f64,
    /// Length of one error unit in meters.
    pub working_unit: f64,
    pub anti_windup: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            kp: 2e-6,
            ki: 2e-8,
            deadband: 5e-4,
            p_min: 0.0,
            p_max: 1.3,
            dt: 0.01,
            working_unit: 1e-5,
            anti_windup: true,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.kp >= 0.0 && self.ki >= 0.0) {
            return bad(format!("gains must be non-negative (kp = {}, ki = {})", self.kp, self.ki));
        }
        if !(self.deadband >= 0.0) {
            return bad(format!("deadband must be non-negative, got {}", self.deadband));
        }
        if !(self.p_min < self.p_max) {
            return bad(format!("need p_min < p_max, got [{}, {}]", self.p_min, self.p_max));
        }
        if !(self.dt > 0.0) {
            return bad(format!("control period must be positive, got {}", self.dt));
        }
        if !(self.working_unit > 0.0 && self.working_unit.is_finite()) {
            return bad(format!("working unit must be positive, got {}", self.working_unit));
        }
        Ok(())
    }

    /// Deadband expressed in working units.
    pub fn deadband_units(&self) -> f64 {
        self.deadband / self.working_unit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub integral: f64,
    pub pressures: Vector4<f64>,
}

impl ControllerState {
    pub fn new(pressures: Vector4<f64>) -> Self {
        ControllerState {
            integral: 0.0,
            pressures,
        }
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub e_k: f64,
    pub u_k: f64,
    pub demand: Vector4<f64>,
    pub increment: Vector4<f64>,
}

pub fn tracking_error(p_star: &Vector3<f64>, p: &Vector3<f64>) -> Vector3<f64> {
    p_star - p
}

pub fn demand(e: &Vector3<f64>) -> Vector4<f64> {
    Vector4::from_fn(|i, _| {
        let r = DEMAND_MATRIX[i];
        r[0] * e.x + r[1] * e.y + r[2] * e.z
    })
}

pub fn apply_deadband(d: &Vector4<f64>, delta: f64) -> Vector4<f64> {
    d.map(|x| if x.abs() < delta { 0.0 } else { x })
}

pub fn scalar_error(d: &Vector4<f64>) -> f64 {
    d.norm()
}

/// Advances the integral and returns u_k. With `hold` the integral is left as is.
pub fn pi_update(state: &mut ControllerState, e_k: f64, cfg: &ControllerConfig, hold: bool) -> f64 {
    if !hold {
        state.integral += e_k * cfg.dt;
    }
    cfg.kp * e_k + cfg.ki * state.integral
}

pub fn distribute(u_k: f64, d: &Vector4<f64>) -> Vector4<f64> {
    let alpha = d.abs().sum();
    if alpha > 0.0 {
        d.map(|x| u_k * x / alpha)
    } else {
        Vector4::zeros()
    }
}

pub fn clip(x: f64, a: f64, b: f64) -> f64 {
    x.max(a).min(b)
}

pub fn clip_pressures(p: &Vector4<f64>, dp: &Vector4<f64>, cfg: &ControllerConfig) -> Vector4<f64> {
    (p + dp).map(|x| clip(x, cfg.p_min, cfg.p_max))
}

/// True when some cavity sits at a bound and its demand points further out.
pub fn saturated(p: &Vector4<f64>, d: &Vector4<f64>, cfg: &ControllerConfig) -> bool {
    p.iter()
        .zip(d.iter())
        .any(|(&p, &d)| (p <= cfg.p_min && d < 0.0) || (p >= cfg.p_max && d > 0.0))
}

/// One full controller update from target and tip positions in meters.
pub fn controller_step(
    p_star: &Vector3<f64>,
    p_tip: &Vector3<f64>,
    state: &mut ControllerState,
    cfg: &ControllerConfig,
) -> ControlOutput {
    let e = tracking_error(p_star, p_tip) / cfg.working_unit;
    let d = apply_deadband(&demand(&e), cfg.deadband_units());
    let e_k = scalar_error(&d);
    let hold = cfg.anti_windup && saturated(&state.pressures, &d, cfg);
    let u_k = pi_update(state, e_k, cfg, hold);
    let dp = distribute(u_k, &d);
    state.pressures = clip_pressures(&state.pressures, &dp, cfg);
    ControlOutput {
        e_k,
        u_k,
        demand: d,
        increment: dp,
    }
}
