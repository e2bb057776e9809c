//! Geometrically linear isotropic elasticity.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::snh::Matrix9;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearElasticParams {
    pub youngs: f64,
    pub poisson: f64,
}

impl LinearElasticParams {
    pub fn new(youngs: f64, poisson: f64) -> Result<Self> {
        let p = LinearElasticParams { youngs, poisson };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.youngs > 0.0 && self.youngs.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Young's modulus must be positive, got {}",
                self.youngs
            )));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "Poisson ratio must lie in (-1, 0.5), got {}",
                self.poisson
            )));
        }
        Ok(())
    }

    pub fn lame_mu(&self) -> f64 {
        self.youngs / (2.0 * (1.0 + self.poisson))
    }

    pub fn lame_lambda(&self) -> f64 {
        self.youngs * self.poisson / ((1.0 + self.poisson) * (1.0 - 2.0 * self.poisson))
    }
}

pub fn small_strain(f: &Matrix3<f64>) -> Matrix3<f64> {
    0.5 * (f + f.transpose()) - Matrix3::identity()
}

/// Ψ = μ tr(ε²) + λ/2 tr(ε)².
pub fn linear_energy_density(f: &Matrix3<f64>, p: &LinearElasticParams) -> f64 {
    let e = small_strain(f);
    let tr = e.trace();
    p.lame_mu() * e.norm_squared() + 0.5 * p.lame_lambda() * tr * tr
}

pub fn linear_stress(f: &Matrix3<f64>, p: &LinearElasticParams) -> Matrix3<f64> {
    let e = small_strain(f);
    2.0 * p.lame_mu() * e + p.lame_lambda() * e.trace() * Matrix3::identity()
}

pub fn linear_tangent(p: &LinearElasticParams) -> Matrix9 {
    let (mu, lambda) = (p.lame_mu(), p.lame_lambda());
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    Matrix9::from_fn(|a, b| {
        let (i, j) = (a % 3, a / 3);
        let (k, l) = (b % 3, b / 3);
        mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k)) + lambda * d(i, j) * d(k, l)
    })
}
