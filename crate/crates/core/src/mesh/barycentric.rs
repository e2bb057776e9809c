//! Piecewise-linear embedding of auxiliary points in a tet mesh.

use nalgebra::Matrix3;

use super::{Point, TetMesh};
use crate::error::{Error, Result};

const INSIDE_TOL: f64 = 1e-9;
const OUTSIDE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedPoint {
    pub tet: usize,
    /// Vertex indices of the containing tet.
    pub nodes: [usize; 4],
    pub weights: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricMap {
    pub points: Vec<MappedPoint>,
}

fn weights(tet: [Point; 4], p: &Point) -> Option<[f64; 4]> {
    let [a, b, c, d] = tet;
    let m = Matrix3::from_columns(&[b - a, c - a, d - a]);
    let l = m.lu().solve(&(p - a))?;
    Some([1.0 - l.x - l.y - l.z, l.x, l.y, l.z])
}

fn interpolate(nodes: [usize; 4], w: [f64; 4], q: &[Point]) -> Point {
    (0..4).map(|k| w[k] * q[nodes[k]]).sum()
}

/// Maps each point to the lowest-index tet containing it. Points slightly
/// outside the mesh (within 1 µm) go to the nearest tet instead.
pub fn build_barycentric_map(mesh: &TetMesh, rest: &[Point], points: &[Point]) -> Result<BarycentricMap> {
    if rest.len() != mesh.vertices.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rest positions for a mesh with {} vertices",
            rest.len(),
            mesh.vertices.len()
        )));
    }
    let mut out = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let mut best: Option<(f64, MappedPoint)> = None;
        for (t, &nodes) in mesh.tets.iter().enumerate() {
            let Some(w) = weights(nodes.map(|i| rest[i]), p) else {
                continue;
            };
            let candidate = MappedPoint {
                tet: t,
                nodes,
                weights: w,
            };
            if w.iter().all(|&x| x >= -INSIDE_TOL) {
                best = Some((0.0, candidate));
                break;
            }
            // distance to the closest point reachable with clamped weights
            let mut clamped = w.map(|x| x.max(0.0));
            let s: f64 = clamped.iter().sum();
            clamped.iter_mut().for_each(|x| *x /= s);
            let dist = (interpolate(nodes, clamped, rest) - p).norm();
            if best.as_ref().map_or(true, |(d, _)| dist < *d) {
                best = Some((dist, candidate));
            }
        }
        match best {
            Some((dist, m)) if dist <= OUTSIDE_TOL => out.push(m),
            _ => {
                return Err(Error::PointOutsideMesh {
                    index,
                    x: p.x,
                    y: p.y,
                    z: p.z,
                })
            }
        }
    }
    Ok(BarycentricMap { points: out })
}

pub fn apply_map(map: &BarycentricMap, q: &[Point]) -> Vec<Point> {
    map.points
        .iter()
        .map(|m| interpolate(m.nodes, m.weights, q))
        .collect()
}
