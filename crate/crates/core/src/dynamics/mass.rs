//! Lumped (diagonal) mass.

use crate::error::{Error, Result};
use crate::mesh::TetMesh;

#[derive(Debug, Clone, PartialEq)]
pub struct MassModel {
    pub density: f64,
    /// Mass of each node [kg].
    pub masses: Vec<f64>,
}

impl MassModel {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// Each tet hands a quarter of its mass to each of its nodes.
pub fn lump_mass(mesh: &TetMesh, density: f64) -> Result<MassModel> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::InvalidParameter(format!("density must be positive, got {density}")));
    }
    let mut masses = vec![0.0; mesh.vertices.len()];
    for (t, tet) in mesh.tets.iter().enumerate() {
        let m = 0.25 * density * mesh.tet_volume(t);
        for &i in tet {
            masses[i] += m;
        }
    }
    if let Some(i) = masses.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::InvalidParameter(format!("node {i} belongs to no element")));
    }
    Ok(MassModel { density, masses })
}
