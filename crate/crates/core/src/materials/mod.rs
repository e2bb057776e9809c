//! Constitutive models and linear-tet element assembly.

mod linear;
mod snh;

use nalgebra::{Matrix3, SMatrix};

pub use linear::{linear_energy_density, linear_stress, linear_tangent, small_strain, LinearElasticParams};
pub use snh::{
    cofactor, snh_energy_density, snh_first_piola, snh_tangent, Matrix9, StableNeoHookeanParams,
};

use crate::error::{Error, Result};
use crate::mesh::{signed_volume, Point, TetMesh};
use crate::sparse::{add_block, BlockPattern, CscMatrix};

pub type Matrix12 = SMatrix<f64, 12, 12>;
type Matrix9x12 = SMatrix<f64, 9, 12>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Material {
    StableNeoHookean(StableNeoHookeanParams),
    LinearElastic(LinearElasticParams),
}

impl Material {
    pub fn energy_density(&self, f: &Matrix3<f64>) -> f64 {
        match self {
            Material::StableNeoHookean(p) => snh_energy_density(f, p),
            Material::LinearElastic(p) => linear_energy_density(f, p),
        }
    }

    /// First Piola–Kirchhoff stress (equal to the Cauchy stress in the linear model).
    pub fn stress(&self, f: &Matrix3<f64>) -> Matrix3<f64> {
        match self {
            Material::StableNeoHookean(p) => snh_first_piola(f, p),
            Material::LinearElastic(p) => linear_stress(f, p),
        }
    }

    pub fn tangent(&self, f: &Matrix3<f64>) -> Matrix9 {
        match self {
            Material::StableNeoHookean(p) => snh_tangent(f, p),
            Material::LinearElastic(p) => linear_tangent(p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Material::StableNeoHookean(p) => p.validate(),
            Material::LinearElastic(p) => p.validate(),
        }
    }
}

/// Rest-state kinematics of one tet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementBasis {
    pub dm_inv: Matrix3<f64>,
    pub volume: f64,
}

impl ElementBasis {
    pub fn new(rest: &[Point; 4]) -> Result<Self> {
        let [a, b, c, d] = rest;
        let volume = signed_volume(a, b, c, d);
        let dm = Matrix3::from_columns(&[b - a, c - a, d - a]);
        let dm_inv = dm.try_inverse().filter(|_| volume > 0.0).ok_or_else(|| {
            Error::DegenerateElement(format!("rest volume {volume:e} is not positive"))
        })?;
        Ok(ElementBasis { dm_inv, volume })
    }

    /// Shape-function gradients: F = Σ_a x_a g_aᵀ.
    pub fn gradients(&self) -> [nalgebra::Vector3<f64>; 4] {
        let g1 = self.dm_inv.row(0).transpose();
        let g2 = self.dm_inv.row(1).transpose();
        let g3 = self.dm_inv.row(2).transpose();
        [-(g1 + g2 + g3), g1, g2, g3]
    }

    /// ∂vec(F)/∂x as a 9×12 matrix.
    fn jacobian(&self) -> Matrix9x12 {
        let g = self.gradients();
        let mut b = Matrix9x12::zeros();
        for (a, ga) in g.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    b[(i + 3 * j, 3 * a + i)] = ga[j];
                }
            }
        }
        b
    }
}

pub fn deformation_gradient(basis: &ElementBasis, q: &[Point; 4]) -> Matrix3<f64> {
    let ds = Matrix3::from_columns(&[q[1] - q[0], q[2] - q[0], q[3] - q[0]]);
    ds * basis.dm_inv
}

pub fn element_energy(basis: &ElementBasis, q: &[Point; 4], material: &Material) -> f64 {
    basis.volume * material.energy_density(&deformation_gradient(basis, q))
}

pub fn element_forces(basis: &ElementBasis, q: &[Point; 4], material: &Material) -> [Point; 4] {
    let p = material.stress(&deformation_gradient(basis, q));
    let h = -basis.volume * p * basis.dm_inv.transpose();
    let f1 = h.column(0).into_owned();
    let f2 = h.column(1).into_owned();
    let f3 = h.column(2).into_owned();
    [-(f1 + f2 + f3), f1, f2, f3]
}

/// K = ∂²(W Ψ)/∂x², node-major ordering (3a + k).
pub fn element_stiffness(basis: &ElementBasis, q: &[Point; 4], material: &Material) -> Matrix12 {
    let h = material.tangent(&deformation_gradient(basis, q));
    let b = basis.jacobian();
    basis.volume * b.transpose() * h * b
}

/// Elements of one body with cached rest bases.
#[derive(Debug, Clone)]
pub struct FemModel {
    pub tets: Vec<[usize; 4]>,
    pub bases: Vec<ElementBasis>,
    pub material: Material,
}

/// Start offsets of each element's 16 node blocks inside a global pattern.
pub type ElementSlots = Vec<[usize; 16]>;

impl FemModel {
    pub fn new(mesh: &TetMesh, material: Material) -> Result<Self> {
        material.validate()?;
        let bases = (0..mesh.tets.len())
            .map(|t| ElementBasis::new(&mesh.tet_points(t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(FemModel {
            tets: mesh.tets.clone(),
            bases,
            material,
        })
    }

    fn element_q(&self, t: usize, q: &[Point]) -> [Point; 4] {
        self.tets[t].map(|i| q[i])
    }

    pub fn energy(&self, q: &[Point]) -> f64 {
        (0..self.tets.len())
            .map(|t| element_energy(&self.bases[t], &self.element_q(t, q), &self.material))
            .sum()
    }

    pub fn forces(&self, q: &[Point]) -> Vec<Point> {
        let mut f = vec![Point::zeros(); q.len()];
        for t in 0..self.tets.len() {
            let fe = element_forces(&self.bases[t], &self.element_q(t, q), &self.material);
            for (a, &node) in self.tets[t].iter().enumerate() {
                f[node] += fe[a];
            }
        }
        f
    }

    /// Element node lists shifted by `offset`, for building a global pattern.
    pub fn element_nodes(&self, offset: usize) -> Vec<[usize; 4]> {
        self.tets.iter().map(|t| t.map(|i| i + offset)).collect()
    }

    pub fn slots(&self, pattern: &BlockPattern, offset: usize) -> ElementSlots {
        self.tets
            .iter()
            .map(|t| {
                let mut s = [0; 16];
                for a in 0..4 {
                    for b in 0..4 {
                        s[4 * a + b] = pattern.block_slot(t[a] + offset, t[b] + offset);
                    }
                }
                s
            })
            .collect()
    }

    /// Adds internal forces to `f` and stiffness to `k`, both indexed globally
    /// with this body's nodes starting at `offset`.
    pub fn assemble_into(
        &self,
        q: &[Point],
        offset: usize,
        slots: &ElementSlots,
        f: &mut [Point],
        k: &mut CscMatrix,
    ) {
        for t in 0..self.tets.len() {
            let xe = self.element_q(t, q);
            let fe = element_forces(&self.bases[t], &xe, &self.material);
            let ke = element_stiffness(&self.bases[t], &xe, &self.material);
            let nodes = self.tets[t];
            for a in 0..4 {
                f[nodes[a] + offset] += fe[a];
                for b in 0..4 {
                    let block: Matrix3<f64> = ke.fixed_view::<3, 3>(3 * a, 3 * b).into_owned();
                    add_block(k, slots[t][4 * a + b], nodes[b] + offset, &block, 1.0);
                }
            }
        }
    }
}

/// Global internal force vector (flattened, 3 per node) and sparse stiffness.
pub fn assemble(mesh: &TetMesh, q: &[Point], material: &Material) -> Result<(Vec<f64>, CscMatrix)> {
    if q.len() != mesh.vertices.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} positions for {} vertices",
            q.len(),
            mesh.vertices.len()
        )));
    }
    let model = FemModel::new(mesh, *material)?;
    let pattern = BlockPattern::from_elements(q.len(), model.tets.iter().map(|t| &t[..]));
    let slots = model.slots(&pattern, 0);
    let mut k = pattern.zeros();
    let mut f = vec![Point::zeros(); q.len()];
    model.assemble_into(q, 0, &slots, &mut f, &mut k);
    Ok((f.iter().flat_map(|p| [p.x, p.y, p.z]).collect(), k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;
    use nalgebra::{DMatrix, Rotation3};
    use proptest::prelude::*;

    fn rest_tet() -> [Point; 4] {
        [
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.1, 0.0),
            Point::new(0.2, 0.9, 0.1),
            Point::new(0.1, 0.2, 1.1),
        ]
    }

    fn materials() -> [Material; 2] {
        [
            Material::StableNeoHookean(StableNeoHookeanParams::new(1.5, 2.0).unwrap()),
            Material::LinearElastic(LinearElasticParams::new(4.0, 0.3).unwrap()),
        ]
    }

    fn perturbed(d: &[f64; 12]) -> [Point; 4] {
        let mut q = rest_tet();
        for a in 0..4 {
            q[a] += Point::new(d[3 * a], d[3 * a + 1], d[3 * a + 2]);
        }
        q
    }

    #[test]
    fn rest_gives_identity_and_no_force() {
        let basis = ElementBasis::new(&rest_tet()).unwrap();
        let f = deformation_gradient(&basis, &rest_tet());
        assert!((f - Matrix3::identity()).norm() < 1e-14);
        for m in materials() {
            for fa in element_forces(&basis, &rest_tet(), &m) {
                assert!(fa.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn scale_and_rotation_kinematics() {
        let x = rest_tet();
        let basis = ElementBasis::new(&x).unwrap();
        let scaled = x.map(|p| 1.7 * p);
        assert!((deformation_gradient(&basis, &scaled) - Matrix3::<f64>::identity() * 1.7).norm() < 1e-13);
        let r = *Rotation3::from_euler_angles(0.4, 0.2, -0.9).matrix();
        let rotated = x.map(|p| r * p + Point::new(3.0, 1.0, 2.0));
        assert!((deformation_gradient(&basis, &rotated) - r).norm() < 1e-13);
        // rigid motions are force-free for the hyperelastic model
        let snh = materials()[0];
        for fa in element_forces(&basis, &rotated, &snh) {
            assert!(fa.norm() < 1e-12);
        }
    }

    #[test]
    fn translation_is_force_free() {
        let basis = ElementBasis::new(&rest_tet()).unwrap();
        let q = rest_tet().map(|p| p + Point::new(-2.0, 5.0, 0.3));
        for m in materials() {
            for fa in element_forces(&basis, &q, &m) {
                assert!(fa.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_basis_errors() {
        let mut x = rest_tet();
        x[3] = x[1];
        assert!(ElementBasis::new(&x).is_err());
    }

    #[test]
    fn rest_linear_stiffness_has_six_rigid_modes() {
        let basis = ElementBasis::new(&rest_tet()).unwrap();
        let k = element_stiffness(&basis, &rest_tet(), &materials()[1]);
        let eig = k.symmetric_eigen().eigenvalues;
        let scale = eig.amax();
        let zeros = eig.iter().filter(|e| e.abs() < 1e-10 * scale).count();
        assert_eq!(zeros, 6);
        assert!(eig.iter().all(|&e| e > -1e-10 * scale));
    }

    fn two_tet_mesh() -> TetMesh {
        let mut v = rest_tet().to_vec();
        v.push(Point::new(1.2, 1.1, 1.0));
        TetMesh::new(v, vec![[0, 1, 2, 3], [1, 4, 2, 3]], IndexMap::new()).unwrap()
    }

    #[test]
    fn single_tet_assembly_equals_element() {
        let x = rest_tet();
        let mesh = TetMesh::new(x.to_vec(), vec![[0, 1, 2, 3]], IndexMap::new()).unwrap();
        let q = perturbed(&[0.1, 0.0, -0.05, 0.02, 0.03, 0.0, 0.0, 0.1, 0.0, -0.04, 0.0, 0.07]);
        let basis = ElementBasis::new(&x).unwrap();
        for m in materials() {
            let (f, k) = assemble(&mesh, &q, &m).unwrap();
            let fe = element_forces(&basis, &q, &m);
            let ke = element_stiffness(&basis, &q, &m);
            for a in 0..4 {
                for i in 0..3 {
                    assert_eq!(f[3 * a + i], fe[a][i]);
                }
            }
            let d = k.to_dense();
            assert!((d - DMatrix::from_column_slice(12, 12, ke.as_slice())).norm() < 1e-14);
        }
    }

    #[test]
    fn two_tet_assembly_matches_dense_scatter() {
        let mesh = two_tet_mesh();
        let q: Vec<Point> = mesh
            .vertices
            .iter()
            .enumerate()
            .map(|(i, p)| p + 0.05 * Point::new(i as f64, -(i as f64).sin(), 0.3))
            .collect();
        for m in materials() {
            let (f, k) = assemble(&mesh, &q, &m).unwrap();
            let mut fd = vec![0.0; 15];
            let mut kd = DMatrix::<f64>::zeros(15, 15);
            for tet in &mesh.tets {
                let x = tet.map(|i| mesh.vertices[i]);
                let basis = ElementBasis::new(&x).unwrap();
                let xe = tet.map(|i| q[i]);
                let fe = element_forces(&basis, &xe, &m);
                let ke = element_stiffness(&basis, &xe, &m);
                for a in 0..4 {
                    for i in 0..3 {
                        fd[3 * tet[a] + i] += fe[a][i];
                        for b in 0..4 {
                            for j in 0..3 {
                                kd[(3 * tet[a] + i, 3 * tet[b] + j)] += ke[(3 * a + i, 3 * b + j)];
                            }
                        }
                    }
                }
            }
            for (x, y) in f.iter().zip(&fd) {
                assert!((x - y).abs() < 1e-14);
            }
            assert!((k.to_dense() - kd).norm() < 1e-13);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn forces_are_negative_energy_gradient(d in prop::array::uniform12(-0.2f64..0.2)) {
            let basis = ElementBasis::new(&rest_tet()).unwrap();
            let q = perturbed(&d);
            for m in materials() {
                let f = element_forces(&basis, &q, &m);
                let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-6);
                let h = 1e-6;
                for a in 0..4 {
                    for i in 0..3 {
                        let mut qp = q;
                        let mut qm = q;
                        qp[a][i] += h;
                        qm[a][i] -= h;
                        let fd = -(element_energy(&basis, &qp, &m) - element_energy(&basis, &qm, &m)) / (2.0 * h);
                        prop_assert!((fd - f[a][i]).abs() <= 1e-4 * scale);
                    }
                }
            }
        }

        #[test]
        fn stiffness_is_symmetric_force_jacobian(d in prop::array::uniform12(-0.2f64..0.2)) {
            let basis = ElementBasis::new(&rest_tet()).unwrap();
            let q = perturbed(&d);
            for m in materials() {
                let k = element_stiffness(&basis, &q, &m);
                prop_assert!((k - k.transpose()).norm() <= 1e-8 * k.norm());
                let h = 1e-6;
                for b in 0..4 {
                    for j in 0..3 {
                        let mut qp = q;
                        let mut qm = q;
                        qp[b][j] += h;
                        qm[b][j] -= h;
                        let fp = element_forces(&basis, &qp, &m);
                        let fm = element_forces(&basis, &qm, &m);
                        for a in 0..4 {
                            for i in 0..3 {
                                let fd = -(fp[a][i] - fm[a][i]) / (2.0 * h);
                                prop_assert!((fd - k[(3 * a + i, 3 * b + j)]).abs() <= 1e-3 * k.norm() / 12.0);
                            }
                        }
                    }
                }
            }
        }
    }
}
