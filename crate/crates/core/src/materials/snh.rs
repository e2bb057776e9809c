//! Stable Neo-Hookean hyperelasticity.

use nalgebra::{Matrix3, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix9 = SMatrix<f64, 9, 9>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableNeoHookeanParams {
    pub mu: f64,
    pub lambda: f64,
}

impl StableNeoHookeanParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        let p = StableNeoHookeanParams { mu, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Parameters whose small-strain response matches the given Lamé moduli.
    /// The energy's linearisation has first Lamé coefficient `lambda − mu`.
    pub fn from_lame(mu: f64, lame_lambda: f64) -> Result<Self> {
        Self::new(mu, lame_lambda + mu)
    }
}

pub fn cofactor(f: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = f.column(1).cross(&f.column(2));
    let c1 = f.column(2).cross(&f.column(0));
    let c2 = f.column(0).cross(&f.column(1));
    Matrix3::from_columns(&[c0, c1, c2])
}

/// Ψ = μ/2 (I_C − 3) − μ (J − 1) + λ/2 (J − 1)².
pub fn snh_energy_density(f: &Matrix3<f64>, p: &StableNeoHookeanParams) -> f64 {
    let ic = f.norm_squared();
    let j = f.determinant();
    0.5 * p.mu * (ic - 3.0) - p.mu * (j - 1.0) + 0.5 * p.lambda * (j - 1.0) * (j - 1.0)
}

pub fn snh_first_piola(f: &Matrix3<f64>, p: &StableNeoHookeanParams) -> Matrix3<f64> {
    let j = f.determinant();
    p.mu * f + (p.lambda * (j - 1.0) - p.mu) * cofactor(f)
}

const LEVI: fn(usize, usize, usize) -> f64 = |i, j, k| {
    if i == j || j == k || i == k {
        0.0
    } else if (i + 1) % 3 == j {
        1.0
    } else {
        -1.0
    }
};

/// ∂P/∂F with column-major vectorisation (entry F_ij at index i + 3j).
pub fn snh_tangent(f: &Matrix3<f64>, p: &StableNeoHookeanParams) -> Matrix9 {
    let j = f.determinant();
    let cof = cofactor(f);
    let s = p.lambda * (j - 1.0) - p.mu;
    let mut h = Matrix9::identity() * p.mu;
    for (b, (k, l)) in (0..3).flat_map(|l| (0..3).map(move |k| (k, l))).enumerate() {
        for (a, (i, jj)) in (0..3).flat_map(|c| (0..3).map(move |r| (r, c))).enumerate() {
            // ∂cof_ij/∂F_kl = ε_ikm ε_jln F_mn
            let mut dcof = 0.0;
            for m in 0..3 {
                let e1 = LEVI(i, k, m);
                if e1 == 0.0 {
                    continue;
                }
                for n in 0..3 {
                    dcof += e1 * LEVI(jj, l, n) * f[(m, n)];
                }
            }
            h[(a, b)] += s * dcof + p.lambda * cof[(i, jj)] * cof[(k, l)];
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn params() -> StableNeoHookeanParams {
        StableNeoHookeanParams::new(1.3, 0.7).unwrap()
    }

    fn fd_piola(f: &Matrix3<f64>, p: &StableNeoHookeanParams, h: f64) -> Matrix3<f64> {
        let mut out = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut fp = *f;
                let mut fm = *f;
                fp[(i, j)] += h;
                fm[(i, j)] -= h;
                out[(i, j)] = (snh_energy_density(&fp, p) - snh_energy_density(&fm, p)) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn identity_is_stress_free() {
        let p = params();
        assert_eq!(snh_energy_density(&Matrix3::identity(), &p), 0.0);
        assert_eq!(snh_first_piola(&Matrix3::identity(), &p), Matrix3::zeros());
    }

    #[test]
    fn doubled_identity_energy() {
        let p = StableNeoHookeanParams::new(1.0, 0.0).unwrap();
        assert!((snh_energy_density(&(2.0 * Matrix3::identity()), &p) + 2.5).abs() < 1e-14);
    }

    #[test]
    fn rotations_cost_nothing() {
        let p = params();
        let r = *Rotation3::from_euler_angles(0.3, -1.1, 2.0).matrix();
        assert!(snh_energy_density(&r, &p).abs() < 1e-14);
        assert!(snh_first_piola(&r, &p).norm() < 1e-14);
    }

    #[test]
    fn invalid_params() {
        assert!(StableNeoHookeanParams::new(0.0, 1.0).is_err());
        assert!(StableNeoHookeanParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn lame_mapping_linearises_to_lame_moduli() {
        // small volumetric strain: σ ≈ (2μ + 3λ_L) e I
        let (mu, lame) = (2.0, 5.0);
        let p = StableNeoHookeanParams::from_lame(mu, lame).unwrap();
        let e = 1e-7;
        let piola = snh_first_piola(&((1.0 + e) * Matrix3::identity()), &p);
        assert!((piola[(0, 0)] / e - (2.0 * mu + 3.0 * lame)).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn piola_matches_energy_gradient(v in prop::array::uniform9(-0.4f64..0.4)) {
            let p = params();
            let f = Matrix3::identity() + Matrix3::from_column_slice(&v);
            let fd = fd_piola(&f, &p, 1e-6);
            let an = snh_first_piola(&f, &p);
            prop_assert!((fd - an).norm() <= 1e-5 * an.norm().max(1e-3));
        }

        #[test]
        fn tangent_matches_piola_differences(v in prop::array::uniform9(-0.4f64..0.4)) {
            let p = params();
            let f = Matrix3::identity() + Matrix3::from_column_slice(&v);
            let h = snh_tangent(&f, &p);
            let eps = 1e-6;
            for b in 0..9 {
                let mut fp = f;
                let mut fm = f;
                fp[(b % 3, b / 3)] += eps;
                fm[(b % 3, b / 3)] -= eps;
                let col = (snh_first_piola(&fp, &p) - snh_first_piola(&fm, &p)) / (2.0 * eps);
                for a in 0..9 {
                    prop_assert!((col[(a % 3, a / 3)] - h[(a, b)]).abs() < 1e-6 * h.norm());
                }
            }
            prop_assert!((h - h.transpose()).norm() < 1e-12 * h.norm());
        }

        #[test]
        fn energy_is_homogeneous_in_moduli(v in prop::array::uniform9(-0.4f64..0.4), c in 0.1f64..10.0) {
            let p = params();
            let q = StableNeoHookeanParams::new(c * p.mu, c * p.lambda).unwrap();
            let f = Matrix3::identity() + Matrix3::from_column_slice(&v);
            let a = c * snh_energy_density(&f, &p);
            prop_assert!((snh_energy_density(&f, &q) - a).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }
}
