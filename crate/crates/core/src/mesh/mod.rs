//! Tetrahedral volume meshes with named node and triangle groups.

mod arm;
mod barycentric;
mod io;

use std::collections::HashMap;

use indexmap::IndexMap;
use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use arm::{
    generate_arm, ArmModel, ArmParams, CAVITY_GROUPS, CAVITY_SIDES, COUPLING_GROUP, FIXED_GROUP, TIP_GROUP,
};
pub use barycentric::{apply_map, build_barycentric_map, BarycentricMap, MappedPoint};
pub use io::{format_mesh, load_mesh, parse_mesh, write_mesh};

pub type Point = Vector3<f64>;

/// An oriented triangle set. Cavity surfaces are wound so that normals point
/// from the cavity interior into the surrounding solid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriGroup {
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Group {
    Tri(TriGroup),
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    pub vertices: Vec<Point>,
    pub tets: Vec<[usize; 4]>,
    pub groups: IndexMap<String, Group>,
}

/// Signed volume of the tet (a, b, c, d); positive when (b-a, c-a, d-a) is right-handed.
pub fn signed_volume(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

/// Area and unit normal of a triangle; the normal follows the winding (a, b, c).
pub fn triangle_area_normal(positions: &[Point], tri: [usize; 3]) -> Result<(f64, Point)> {
    let [a, b, c] = tri.map(|i| positions[i]);
    let n = (b - a).cross(&(c - a));
    let norm = n.norm();
    let scale = (b - a).norm_squared().max((c - a).norm_squared());
    if !(norm > 1e-14 * scale) || !norm.is_finite() {
        return Err(Error::DegenerateTriangle(tri));
    }
    Ok((0.5 * norm, n / norm))
}

impl TetMesh {
    /// Builds a mesh and checks every invariant.
    pub fn new(
        vertices: Vec<Point>,
        tets: Vec<[usize; 4]>,
        groups: IndexMap<String, Group>,
    ) -> Result<Self> {
        let mesh = TetMesh {
            vertices,
            tets,
            groups,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (t, tet) in self.tets.iter().enumerate() {
            for &index in tet {
                if index >= n {
                    return Err(Error::TetIndexOutOfRange {
                        tet: t,
                        index,
                        n_vertices: n,
                    });
                }
            }
        }
        for t in 0..self.tets.len() {
            let volume = self.tet_volume(t);
            if !(volume > 0.0) {
                return Err(Error::InvertedTet { tet: t, volume });
            }
        }
        for (name, group) in &self.groups {
            let out_of_range = match group {
                Group::Tri(g) => g.triangles.iter().flatten().find(|&&i| i >= n),
                Group::Nodes(nodes) => nodes.iter().find(|&&i| i >= n),
            };
            if let Some(&index) = out_of_range {
                return Err(Error::GroupIndexOutOfRange {
                    group: name.clone(),
                    index,
                    n_vertices: n,
                });
            }
        }
        Ok(())
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|i| self.vertices[i])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tet_points(t);
        signed_volume(&a, &b, &c, &d)
    }

    /// Sum of signed tet volumes.
    pub fn volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn tri_group(&self, name: &str) -> Result<&TriGroup> {
        match self.groups.get(name) {
            Some(Group::Tri(g)) => Ok(g),
            Some(Group::Nodes(_)) => Err(Error::GroupKind {
                name: name.to_string(),
                expected: "tri",
            }),
            None => Err(Error::MissingGroup(name.to_string())),
        }
    }

    pub fn node_group(&self, name: &str) -> Result<&[usize]> {
        match self.groups.get(name) {
            Some(Group::Nodes(g)) => Ok(g),
            Some(Group::Tri(_)) => Err(Error::GroupKind {
                name: name.to_string(),
                expected: "nodes",
            }),
            None => Err(Error::MissingGroup(name.to_string())),
        }
    }

    /// Inserts a group, rejecting duplicate names.
    pub fn add_group(&mut self, name: impl Into<String>, group: Group) -> Result<()> {
        let name = name.into();
        if self.groups.contains_key(&name) {
            return Err(Error::DuplicateGroup(name));
        }
        self.groups.insert(name, group);
        Ok(())
    }
}

impl TriGroup {
    /// Checks that every edge is shared by exactly two triangles that traverse it
    /// in opposite directions.
    pub fn check_closed(&self) -> std::result::Result<(), String> {
        if self.triangles.is_empty() {
            return Err("no triangles".into());
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if e.0 == e.1 {
                    return Err(format!("triangle {tri:?} repeats a vertex"));
                }
                *directed.entry(e).or_default() += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count != 1 {
                return Err(format!("edge ({a}, {b}) traversed {count} times in one direction"));
            }
            if !directed.contains_key(&(b, a)) {
                return Err(format!("edge ({a}, {b}) has no opposite twin"));
            }
        }
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.check_closed().is_ok()
    }

    /// Total area of the group at the given positions (degenerate triangles count as zero).
    pub fn area(&self, positions: &[Point]) -> f64 {
        self.triangles
            .iter()
            .filter_map(|&t| triangle_area_normal(positions, t).ok())
            .map(|(a, _)| a)
            .sum()
    }

    /// Sum of area-weighted normals; zero for a closed surface.
    pub fn area_vector(&self, positions: &[Point]) -> Point {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                0.5 * (positions[b] - positions[a]).cross(&(positions[c] - positions[a]))
            })
            .sum()
    }

    pub fn nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.triangles.iter().flatten().copied().collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_tet() -> TetMesh {
        TetMesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2, 3]],
            IndexMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn unit_tet_volume() {
        assert!((unit_tet().volume() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_tets_volume() {
        let mut v = unit_tet().vertices;
        v.extend(v.clone().iter().map(|p| p + Point::new(5.0, 0.0, 0.0)));
        let mesh = TetMesh::new(v, vec![[0, 1, 2, 3], [4, 5, 6, 7]], IndexMap::new()).unwrap();
        assert!((mesh.volume() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn inverted_tet_is_rejected() {
        let mesh = unit_tet();
        let err = TetMesh::new(mesh.vertices, vec![[0, 2, 1, 3]], IndexMap::new()).unwrap_err();
        assert!(matches!(err, Error::InvertedTet { tet: 0, .. }));
    }

    #[test]
    fn duplicate_group_is_rejected() {
        let mut mesh = unit_tet();
        mesh.add_group("a", Group::Nodes(vec![0])).unwrap();
        assert!(matches!(
            mesh.add_group("a", Group::Nodes(vec![1])),
            Err(Error::DuplicateGroup(_))
        ));
    }

    #[test]
    fn triangle_area_and_normal() {
        let p = unit_tet().vertices;
        let (area, n) = triangle_area_normal(&p, [0, 1, 2]).unwrap();
        assert_eq!(area, 0.5);
        assert_eq!(n, Point::new(0.0, 0.0, 1.0));

        let (_, n) = triangle_area_normal(&p, [0, 2, 1]).unwrap();
        assert_eq!(n, Point::new(0.0, 0.0, -1.0));

        let scaled: Vec<Point> = p.iter().map(|x| 2.0 * x).collect();
        let (area2, n2) = triangle_area_normal(&scaled, [0, 1, 2]).unwrap();
        assert_eq!(area2, 2.0);
        assert_eq!(n2, Point::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn zero_area_triangle_errors() {
        let p = vec![Point::zeros(), Point::new(1.0, 0.0, 0.0), Point::new(2.0, 0.0, 0.0)];
        assert!(matches!(
            triangle_area_normal(&p, [0, 1, 2]),
            Err(Error::DegenerateTriangle(_))
        ));
    }

    #[test]
    fn tet_boundary_is_closed() {
        // outward-wound faces of the unit tet
        let g = TriGroup {
            triangles: vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        };
        assert!(g.is_closed());
        let p = unit_tet().vertices;
        assert!(g.area_vector(&p).norm() < 1e-15);

        let open = TriGroup {
            triangles: g.triangles[..3].to_vec(),
        };
        assert!(!open.is_closed());

        let mut flipped = g.clone();
        flipped.triangles[0] = [0, 1, 2];
        assert!(!flipped.is_closed());
    }
}
