//! Parametric soft-arm geometry on a structured grid.
//!
//! The arm is a rectangular beam along +x. A structured hexahedral grid is
//! laid over the beam with grid planes on every feature boundary, each hex is
//! split into six tets (Kuhn split, conforming across neighbours), and voxels
//! belonging to the four cavities and to the spine channel are carved out of
//! the actuator body. The spine is meshed from the channel voxels as a
//! separate body sharing coincident nodes with the channel wall.
//!
//! Cavity numbering follows the demand matrix of the position controller: row
//! `i` of the matrix is `(1, a_i, b_i)` and cavity `i` sits at `(-a_i, -b_i)`
//! in the (y, z) cross-section, so that inflating it pushes the tip towards
//! `(a_i, b_i)`:
//!
//! | cavity | y side | z side |
//! |--------|--------|--------|
//! | 1      | +      | +      |
//! | 2      | -      | +      |
//! | 3      | +      | -      |
//! | 4      | -      | -      |

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Group, Point, TetMesh, TriGroup};
use crate::error::{Error, Result};

pub const CAVITY_GROUPS: [&str; 4] = ["cavity1", "cavity2", "cavity3", "cavity4"];
pub const FIXED_GROUP: &str = "fixed";
pub const COUPLING_GROUP: &str = "coupling";
pub const TIP_GROUP: &str = "tip_face";

/// (y sign, z sign) of each cavity centre.
pub const CAVITY_SIDES: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)];

/// Arm dimensions in metres. The cross-section is centred on the x axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmParams {
    pub length: f64,
    /// Cross-section extent along y.
    pub width: f64,
    /// Cross-section extent along z.
    pub height: f64,
    /// Distance from the axis to the inner cavity wall, along y.
    pub cavity_inner_y: f64,
    pub cavity_inner_z: f64,
    pub cavity_size_y: f64,
    pub cavity_size_z: f64,
    /// Axial extent of the cavities.
    pub cavity_start: f64,
    pub cavity_end: f64,
    pub spine_thickness: f64,
    pub spine_height: f64,
    pub element_size: f64,
}

impl Default for ArmParams {
    fn default() -> Self {
        ArmParams {
            length: 0.12,
            width: 0.024,
            height: 0.024,
            cavity_inner_y: 0.0035,
            cavity_inner_z: 0.003,
            cavity_size_y: 0.007,
            cavity_size_z: 0.007,
            cavity_start: 0.015,
            cavity_end: 0.11,
            spine_thickness: 0.002,
            spine_height: 0.009,
            element_size: 0.012,
        }
    }
}

impl ArmParams {
    /// Sets a field by name, as used by `--param key=value` on the command line.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "length" => &mut self.length,
            "width" => &mut self.width,
            "height" => &mut self.height,
            "cavity_inner_y" => &mut self.cavity_inner_y,
            "cavity_inner_z" => &mut self.cavity_inner_z,
            "cavity_size_y" => &mut self.cavity_size_y,
            "cavity_size_z" => &mut self.cavity_size_z,
            "cavity_start" => &mut self.cavity_start,
            "cavity_end" => &mut self.cavity_end,
            "spine_thickness" => &mut self.spine_thickness,
            "spine_height" => &mut self.spine_height,
            "element_size" => &mut self.element_size,
            _ => return Err(Error::InvalidParameter(format!("unknown arm parameter `{key}`"))),
        };
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("length", self.length),
            ("width", self.width),
            ("height", self.height),
            ("cavity_inner_y", self.cavity_inner_y),
            ("cavity_inner_z", self.cavity_inner_z),
            ("cavity_size_y", self.cavity_size_y),
            ("cavity_size_z", self.cavity_size_z),
            ("cavity_start", self.cavity_start),
            ("cavity_end", self.cavity_end),
            ("spine_thickness", self.spine_thickness),
            ("spine_height", self.spine_height),
            ("element_size", self.element_size),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InfeasibleGeometry(format!("{name} must be positive, got {v}")));
            }
        }
        let infeasible = |msg: &str| Err(Error::InfeasibleGeometry(msg.to_string()));
        if self.element_size >= self.length {
            return infeasible("element size must be smaller than the arm length");
        }
        if self.cavity_inner_y + self.cavity_size_y >= 0.5 * self.width
            || self.cavity_inner_z + self.cavity_size_z >= 0.5 * self.height
        {
            return infeasible("cavities overlap the outer wall");
        }
        if !(self.cavity_start < self.cavity_end && self.cavity_end < self.length) {
            return infeasible("cavities must lie strictly inside the arm along x");
        }
        if self.spine_thickness >= self.width || self.spine_height >= self.height {
            return infeasible("spine channel must lie strictly inside the cross-section");
        }
        if self.cavity_inner_y <= 0.5 * self.spine_thickness
            && self.cavity_inner_z <= 0.5 * self.spine_height
        {
            return infeasible("cavities overlap the spine channel");
        }
        Ok(())
    }

    /// Exact actuator volume: beam minus cavities minus spine channel.
    pub fn spa_volume(&self) -> f64 {
        self.length * self.width * self.height
            - 4.0
                * (self.cavity_end - self.cavity_start)
                * self.cavity_size_y
                * self.cavity_size_z
            - self.spine_volume()
    }

    pub fn spine_volume(&self) -> f64 {
        self.length * self.spine_thickness * self.spine_height
    }
}

/// Generated arm: actuator and spine meshes plus the tip marker.
///
/// The actuator mesh carries tri groups `cavity1..cavity4` and node groups
/// `fixed`, `coupling` and `tip_face`; the spine carries `fixed` and
/// `coupling`. The two `coupling` groups are aligned: entry `k` of each names
/// the same physical point.
#[derive(Debug, Clone)]
pub struct ArmModel {
    pub spa: TetMesh,
    pub spine: TetMesh,
    /// Mean of the actuator's `tip_face` nodes.
    pub tip: Point,
}

impl ArmModel {
    /// Assembles a model from meshes, checking the group conventions.
    pub fn from_meshes(spa: TetMesh, spine: TetMesh) -> Result<Self> {
        for name in CAVITY_GROUPS {
            let group = spa.tri_group(name)?;
            group.check_closed().map_err(|reason| Error::OpenSurface {
                name: name.to_string(),
                reason,
            })?;
        }
        spa.node_group(FIXED_GROUP)?;
        spine.node_group(FIXED_GROUP)?;
        let a = spa.node_group(COUPLING_GROUP)?;
        let b = spine.node_group(COUPLING_GROUP)?;
        if a.len() != b.len() {
            return Err(Error::InvalidParameter(format!(
                "coupling groups differ in size ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        for (&i, &j) in a.iter().zip(b) {
            if (spa.vertices[i] - spine.vertices[j]).norm() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "coupling nodes {i} (actuator) and {j} (spine) are not coincident"
                )));
            }
        }
        let tip_nodes = spa.node_group(TIP_GROUP)?;
        if tip_nodes.is_empty() {
            return Err(Error::InvalidParameter("empty tip_face group".into()));
        }
        let tip = tip_nodes.iter().map(|&i| spa.vertices[i]).sum::<Point>() / tip_nodes.len() as f64;
        Ok(ArmModel { spa, spine, tip })
    }

    pub fn coupling_pairs(&self) -> Vec<(usize, usize)> {
        let a = self.spa.node_group(COUPLING_GROUP).unwrap_or(&[]);
        let b = self.spine.node_group(COUPLING_GROUP).unwrap_or(&[]);
        a.iter().copied().zip(b.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Solid,
    Cavity(usize),
    Spine,
}

/// Grid coordinates with a plane at every breakpoint and uniform subdivision
/// between breakpoints so that no cell exceeds `h`.
fn axis_grid(mut breaks: Vec<f64>, h: f64) -> Vec<f64> {
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut coords = vec![breaks[0]];
    for w in breaks.windows(2) {
        let n = ((w[1] - w[0]) / h - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=n {
            coords.push(if k == n {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * k as f64 / n as f64
            });
        }
    }
    coords
}

fn symmetric_breaks(half_extent: f64, planes: &[f64]) -> Vec<f64> {
    let mut b = vec![-half_extent, 0.0, half_extent];
    for &p in planes {
        b.push(p);
        b.push(-p);
    }
    b
}

/// Six Kuhn tets of the unit cube as corner bit-masks (bit 0 = x, 1 = y, 2 = z).
fn kuhn_tets() -> [[usize; 4]; 6] {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    perms.map(|p| {
        let a = 1 << p[0];
        let b = a | (1 << p[1]);
        [0, a, b, 7]
    })
}

pub fn generate_arm(params: &ArmParams) -> Result<ArmModel> {
    params.validate()?;
    let p = params;
    let h = p.element_size;

    let xs = axis_grid(vec![0.0, p.cavity_start, p.cavity_end, p.length], h);
    let ys = axis_grid(
        symmetric_breaks(
            0.5 * p.width,
            &[
                p.cavity_inner_y,
                p.cavity_inner_y + p.cavity_size_y,
                0.5 * p.spine_thickness,
            ],
        ),
        h,
    );
    let zs = axis_grid(
        symmetric_breaks(
            0.5 * p.height,
            &[
                p.cavity_inner_z,
                p.cavity_inner_z + p.cavity_size_z,
                0.5 * p.spine_height,
            ],
        ),
        h,
    );
    let (nx, ny, nz) = (xs.len() - 1, ys.len() - 1, zs.len() - 1);

    let classify = |i: usize, j: usize, k: usize| -> Cell {
        let cx = 0.5 * (xs[i] + xs[i + 1]);
        let cy = 0.5 * (ys[j] + ys[j + 1]);
        let cz = 0.5 * (zs[k] + zs[k + 1]);
        if cy.abs() < 0.5 * p.spine_thickness && cz.abs() < 0.5 * p.spine_height {
            return Cell::Spine;
        }
        let in_x = cx > p.cavity_start && cx < p.cavity_end;
        let in_y = cy.abs() > p.cavity_inner_y && cy.abs() < p.cavity_inner_y + p.cavity_size_y;
        let in_z = cz.abs() > p.cavity_inner_z && cz.abs() < p.cavity_inner_z + p.cavity_size_z;
        if in_x && in_y && in_z {
            let idx = CAVITY_SIDES
                .iter()
                .position(|&(sy, sz)| sy * cy > 0.0 && sz * cz > 0.0)
                .expect("every quadrant has a cavity");
            return Cell::Cavity(idx);
        }
        Cell::Solid
    };

    let mut cells = vec![Cell::Solid; nx * ny * nz];
    let cell_id = |i: usize, j: usize, k: usize| (i * ny + j) * nz + k;
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                cells[cell_id(i, j, k)] = classify(i, j, k);
            }
        }
    }

    let grid_id = |i: usize, j: usize, k: usize| (i * (ny + 1) + j) * (nz + 1) + k;
    let n_grid = (nx + 1) * (ny + 1) * (nz + 1);
    let grid_point = |g: usize| {
        let k = g % (nz + 1);
        let j = (g / (nz + 1)) % (ny + 1);
        let i = g / ((nz + 1) * (ny + 1));
        Point::new(xs[i], ys[j], zs[k])
    };

    // corner-bit mask mirroring the cell split below the y = 0 and z = 0 planes,
    // which keeps the mesh symmetric under both reflections
    let mirror = |j: usize, k: usize| -> usize {
        (if ys[j] + ys[j + 1] < 0.0 { 2 } else { 0 }) | (if zs[k] + zs[k + 1] < 0.0 { 4 } else { 0 })
    };

    let build_body = |want: &dyn Fn(Cell) -> bool| -> (Vec<Option<usize>>, Vec<Point>, Vec<[usize; 4]>) {
        let mut used = vec![false; n_grid];
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    if want(cells[cell_id(i, j, k)]) {
                        for c in 0..8 {
                            used[grid_id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))] = true;
                        }
                    }
                }
            }
        }
        let mut local = vec![None; n_grid];
        let mut vertices = Vec::new();
        for g in 0..n_grid {
            if used[g] {
                local[g] = Some(vertices.len());
                vertices.push(grid_point(g));
            }
        }
        let mut tets = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    if !want(cells[cell_id(i, j, k)]) {
                        continue;
                    }
                    let corner = |c: usize| {
                        local[grid_id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))]
                            .expect("corner marked used")
                    };
                    let m = mirror(j, k);
                    for kt in kuhn_tets() {
                        let mut tet = kt.map(|c| corner(c ^ m));
                        let [a, b, c, d] = tet.map(|v| vertices[v]);
                        if super::signed_volume(&a, &b, &c, &d) < 0.0 {
                            tet.swap(1, 2);
                        }
                        tets.push(tet);
                    }
                }
            }
        }
        (local, vertices, tets)
    };

    let (spa_local, spa_vertices, spa_tets) = build_body(&|c| c == Cell::Solid);
    let (spine_local, spine_vertices, spine_tets) = build_body(&|c| c == Cell::Spine);

    // cavity walls: faces between a cavity cell and a solid cell, normals into the solid
    let mut cavity_tris: Vec<Vec<[usize; 3]>> = vec![Vec::new(); 4];
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let Cell::Cavity(c) = cells[cell_id(i, j, k)] else {
                    continue;
                };
                for axis in 0..3 {
                    for dir in [-1i64, 1] {
                        let mut nb = [i as i64, j as i64, k as i64];
                        nb[axis] += dir;
                        let dims = [nx as i64, ny as i64, nz as i64];
                        if nb[axis] < 0 || nb[axis] >= dims[axis] {
                            return Err(Error::InfeasibleGeometry(
                                "cavity touches the outer boundary".into(),
                            ));
                        }
                        let nb_cell = cells[cell_id(nb[0] as usize, nb[1] as usize, nb[2] as usize)];
                        match nb_cell {
                            Cell::Solid => {}
                            Cell::Cavity(_) => continue,
                            Cell::Spine => {
                                return Err(Error::InfeasibleGeometry(
                                    "cavity touches the spine channel".into(),
                                ))
                            }
                        }
                        // face plane index along `axis`
                        let base = [i, j, k];
                        let plane = if dir > 0 { base[axis] + 1 } else { base[axis] };
                        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
                        let m = mirror(j, k);
                        let flip = |ax: usize, d: usize| if ax > 0 && m & (1 << ax) != 0 { 1 - d } else { d };
                        let corner = |du: usize, dv: usize| {
                            let mut idx = base;
                            idx[axis] = plane;
                            idx[ua] += flip(ua, du);
                            idx[va] += flip(va, dv);
                            spa_local[grid_id(idx[0], idx[1], idx[2])].expect("wall node in actuator")
                        };
                        let (c00, c10, c01, c11) = (corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1));
                        let mut normal = [0.0; 3];
                        normal[axis] = dir as f64;
                        let normal = Point::from(normal);
                        for mut tri in [[c00, c10, c11], [c00, c11, c01]] {
                            let [a, b, cc] = tri.map(|v| spa_vertices[v]);
                            if (b - a).cross(&(cc - a)).dot(&normal) < 0.0 {
                                tri.swap(1, 2);
                            }
                            cavity_tris[c].push(tri);
                        }
                    }
                }
            }
        }
    }

    let proximal = |local: &Vec<Option<usize>>| -> Vec<usize> {
        let mut nodes = Vec::new();
        for j in 0..=ny {
            for k in 0..=nz {
                if let Some(v) = local[grid_id(0, j, k)] {
                    nodes.push(v);
                }
            }
        }
        nodes.sort_unstable();
        nodes
    };

    let mut coupling: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for g in 0..n_grid {
        if let (Some(a), Some(b)) = (spa_local[g], spine_local[g]) {
            if grid_point(g).x > 0.0 {
                coupling.insert(g, (a, b));
            }
        }
    }

    let mut tip_nodes = Vec::new();
    for j in 0..=ny {
        for k in 0..=nz {
            if let Some(v) = spa_local[grid_id(nx, j, k)] {
                tip_nodes.push(v);
            }
        }
    }
    let mut spa_groups = IndexMap::new();
    for (c, tris) in cavity_tris.into_iter().enumerate() {
        spa_groups.insert(CAVITY_GROUPS[c].to_string(), Group::Tri(TriGroup { triangles: tris }));
    }
    spa_groups.insert(FIXED_GROUP.to_string(), Group::Nodes(proximal(&spa_local)));
    spa_groups.insert(
        COUPLING_GROUP.to_string(),
        Group::Nodes(coupling.values().map(|&(a, _)| a).collect()),
    );
    spa_groups.insert(TIP_GROUP.to_string(), Group::Nodes(tip_nodes));

    let mut spine_groups = IndexMap::new();
    spine_groups.insert(FIXED_GROUP.to_string(), Group::Nodes(proximal(&spine_local)));
    spine_groups.insert(
        COUPLING_GROUP.to_string(),
        Group::Nodes(coupling.values().map(|&(_, b)| b).collect()),
    );

    let spa = TetMesh::new(spa_vertices, spa_tets, spa_groups).map_err(|e| e.in_component("actuator mesh"))?;
    let spine = TetMesh::new(spine_vertices, spine_tets, spine_groups).map_err(|e| e.in_component("spine mesh"))?;
    // shares the tip definition and group checks with meshes read from files
    ArmModel::from_meshes(spa, spine)
}
