//! Fixed-node and bilateral node-pair constraints, enforced at velocity level.
//!
//! The saddle-point system `[A Hᵀ; H 0]` is solved by exact elimination:
//! constraint edges (pair ↔ pair, node ↔ ground) form a forest, every tree
//! collapses to a single unknown (or none when anchored to the ground), and the
//! reduced system `TᵀAT y = Tᵀ(b − A g)` has the same kind of sparsity as A.
//! Multipliers are recovered afterwards by peeling the trees from the leaves.

use std::collections::{BTreeSet, VecDeque};

use super::linsolve::LinearSolver;
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::sparse::{BlockPattern, CscMatrix};

/// Constraints on global node indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    /// Pinned nodes with their anchor positions.
    pub fixed: Vec<(usize, Point)>,
    /// Node pairs held at equal positions.
    pub bilateral: Vec<(usize, usize)>,
}

/// Right-hand sides of the constraint rows: Δv_i = c_i for fixed nodes and
/// Δv_a − Δv_b = c_ab for pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintTargets {
    pub fixed: Vec<Point>,
    pub bilateral: Vec<Point>,
}

impl ConstraintSet {
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        for &(i, _) in &self.fixed {
            if i >= n_nodes {
                return Err(Error::InvalidParameter(format!("fixed node {i} out of range")));
            }
        }
        for &(a, b) in &self.bilateral {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidParameter(format!("constraint pair ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("constraint pair ({a}, {a}) joins a node to itself")));
            }
        }
        Ok(())
    }

    /// Targets that remove the current position error within one step of
    /// length `dt`, given the pre-step velocities.
    pub fn velocity_targets(&self, q: &[Point], v: &[Point], dt: f64) -> ConstraintTargets {
        ConstraintTargets {
            fixed: self
                .fixed
                .iter()
                .map(|&(i, anchor)| (anchor - q[i]) / dt - v[i])
                .collect(),
            bilateral: self
                .bilateral
                .iter()
                .map(|&(a, b)| -(q[a] - q[b]) / dt - (v[a] - v[b]))
                .collect(),
        }
    }

    pub fn homogeneous_targets(&self) -> ConstraintTargets {
        ConstraintTargets {
            fixed: vec![Point::zeros(); self.fixed.len()],
            bilateral: vec![Point::zeros(); self.bilateral.len()],
        }
    }

    /// Largest anchor drift and largest pair gap at positions `q`.
    pub fn violation(&self, q: &[Point]) -> (f64, f64) {
        let drift = self
            .fixed
            .iter()
            .map(|&(i, a)| (q[i] - a).norm())
            .fold(0.0, f64::max);
        let gap = self
            .bilateral
            .iter()
            .map(|&(a, b)| (q[a] - q[b]).norm())
            .fold(0.0, f64::max);
        (drift, gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Link {
    /// Root of a free tree, or an unconstrained node.
    Root,
    /// Attached to the ground through fixed constraint `k`.
    Ground(usize),
    /// Attached to `parent` through pair `k`; `child_first` tells whether this
    /// node is the first entry of the pair.
    Pair {
        k: usize,
        parent: usize,
        child_first: bool,
    },
}

#[derive(Debug, Clone)]
pub struct ConstraintSolution {
    pub dv: Vec<f64>,
    /// Multipliers in the units of the right-hand side (impulses for the
    /// Δv system); `H^T λ` is the constraint contribution to `A Δv`.
    pub fixed_lambda: Vec<Point>,
    pub bilateral_lambda: Vec<Point>,
}

/// Elimination solver for one matrix pattern and one constraint topology.
#[derive(Debug)]
pub struct ConstrainedSolver {
    constraints: ConstraintSet,
    n_nodes: usize,
    /// Reduced node of every node, `None` for nodes anchored to the ground.
    node_map: Vec<Option<usize>>,
    links: Vec<Link>,
    /// Constrained nodes in BFS order (parents before children).
    order: Vec<usize>,
    /// Pairs that close a cycle; their multipliers are reported as zero.
    redundant_pairs: Vec<usize>,
    redundant_fixed: Vec<usize>,
    full_nnz: usize,
    entry_map: Vec<usize>,
    reduced: CscMatrix,
    solver: LinearSolver,
}

impl ConstrainedSolver {
    pub fn new(pattern: &BlockPattern, constraints: ConstraintSet, solver: LinearSolver) -> Result<Self> {
        let n = pattern.n_nodes;
        constraints.validate(n)?;

        // adjacency over distinct edges, deterministic order
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut seen_pairs = BTreeSet::new();
        let mut redundant_pairs = Vec::new();
        for (k, &(a, b)) in constraints.bilateral.iter().enumerate() {
            if !seen_pairs.insert((a.min(b), a.max(b))) {
                redundant_pairs.push(k);
                continue;
            }
            adj[a].push((b, k));
            adj[b].push((a, k));
        }
        let mut fixed_of: Vec<Option<usize>> = vec![None; n];
        let mut redundant_fixed = Vec::new();
        for (k, &(i, _)) in constraints.fixed.iter().enumerate() {
            if fixed_of[i].is_some() {
                redundant_fixed.push(k);
            } else {
                fixed_of[i] = Some(k);
            }
        }

        let mut links = vec![Link::Root; n];
        let mut visited = vec![false; n];
        let mut order = Vec::new();
        let mut used_pair = vec![false; constraints.bilateral.len()];
        let mut node_map = vec![None; n];
        let mut n_reduced = 0;
        for start in 0..n {
            if visited[start] {
                continue;
            }
            // collect the component to find out whether it touches the ground
            let mut comp = vec![start];
            visited[start] = true;
            let mut head = 0;
            while head < comp.len() {
                let u = comp[head];
                head += 1;
                for &(w, _) in &adj[u] {
                    if !visited[w] {
                        visited[w] = true;
                        comp.push(w);
                    }
                }
            }
            let grounded: Vec<usize> = {
                let mut g: Vec<usize> = comp.iter().copied().filter(|&u| fixed_of[u].is_some()).collect();
                g.sort_unstable();
                g
            };
            let mut queue = VecDeque::new();
            let mut in_tree = BTreeSet::new();
            if grounded.is_empty() {
                let root = *comp.iter().min().unwrap();
                links[root] = Link::Root;
                queue.push_back(root);
                in_tree.insert(root);
                for &u in &comp {
                    node_map[u] = Some(n_reduced);
                }
                n_reduced += 1;
            } else {
                for &g in &grounded {
                    links[g] = Link::Ground(fixed_of[g].unwrap());
                    queue.push_back(g);
                    in_tree.insert(g);
                }
            }
            while let Some(u) = queue.pop_front() {
                if comp.len() > 1 || links[u] != Link::Root {
                    order.push(u);
                }
                for &(w, k) in &adj[u] {
                    if in_tree.insert(w) {
                        used_pair[k] = true;
                        links[w] = Link::Pair {
                            k,
                            parent: u,
                            child_first: constraints.bilateral[k].0 == w,
                        };
                        queue.push_back(w);
                    }
                }
            }
        }
        for (k, used) in used_pair.iter().enumerate() {
            if !used && !redundant_pairs.contains(&k) {
                redundant_pairs.push(k);
            }
        }
        redundant_pairs.sort_unstable();

        // reduced pattern and entry map
        let mut red_neigh: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_reduced];
        for r in 0..n_reduced {
            red_neigh[r].insert(r);
        }
        for (j, list) in pattern.neighbours.iter().enumerate() {
            let Some(rj) = node_map[j] else { continue };
            for &i in list {
                if let Some(ri) = node_map[i] {
                    red_neigh[rj].insert(ri);
                }
            }
        }
        let red_pattern = BlockPattern {
            n_nodes: n_reduced,
            neighbours: red_neigh.into_iter().map(|s| s.into_iter().collect()).collect(),
        };
        let reduced = red_pattern.zeros();
        let full = pattern.zeros();
        let mut entry_map = vec![usize::MAX; full.nnz()];
        for (j, list) in pattern.neighbours.iter().enumerate() {
            let Some(rj) = node_map[j] else { continue };
            for (slot, &i) in list.iter().enumerate() {
                let Some(ri) = node_map[i] else { continue };
                let rslot = red_pattern.block_slot(ri, rj);
                for c in 0..3 {
                    let src = full.col_ptr[3 * j + c] + 3 * slot;
                    let dst = reduced.col_ptr[3 * rj + c] + 3 * rslot;
                    for r in 0..3 {
                        entry_map[src + r] = dst + r;
                    }
                }
            }
        }

        Ok(ConstrainedSolver {
            constraints,
            n_nodes: n,
            node_map,
            links,
            order,
            redundant_pairs,
            redundant_fixed,
            full_nnz: full.nnz(),
            entry_map,
            reduced,
            solver,
        })
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// Number of unknowns left after elimination.
    pub fn reduced_size(&self) -> usize {
        self.reduced.n
    }

    /// Particular solution g satisfying every tree constraint, zero on roots.
    fn offsets(&self, targets: &ConstraintTargets) -> Vec<Point> {
        let mut g = vec![Point::zeros(); self.n_nodes];
        for &u in &self.order {
            g[u] = match self.links[u] {
                Link::Root => Point::zeros(),
                Link::Ground(k) => targets.fixed[k],
                Link::Pair {
                    k,
                    parent,
                    child_first,
                } => {
                    let c = targets.bilateral[k];
                    if child_first {
                        g[parent] + c
                    } else {
                        g[parent] - c
                    }
                }
            };
        }
        g
    }

    /// Solves `A Δv = b + Hᵀλ` subject to `H Δv = c`.
    pub fn solve(&mut self, a: &CscMatrix, b: &[f64], targets: &ConstraintTargets) -> Result<ConstraintSolution> {
        let n3 = 3 * self.n_nodes;
        if a.n != n3 || b.len() != n3 || a.nnz() != self.full_nnz {
            return Err(Error::DimensionMismatch(format!(
                "system of size {} (nnz {}) does not match the constraint layout ({n3}, nnz {})",
                a.n,
                a.nnz(),
                self.full_nnz
            )));
        }
        let g = self.offsets(targets);
        let scale = targets
            .fixed
            .iter()
            .chain(&targets.bilateral)
            .map(|c| c.norm())
            .fold(1.0, f64::max);
        for &k in &self.redundant_pairs {
            let (p, q) = self.constraints.bilateral[k];
            if self.node_map[p] != self.node_map[q]
                || (g[p] - g[q] - targets.bilateral[k]).norm() > 1e-9 * scale
            {
                return Err(Error::InconsistentConstraints(format!(
                    "pair ({p}, {q}) conflicts with other constraints"
                )));
            }
        }
        for &k in &self.redundant_fixed {
            let i = self.constraints.fixed[k].0;
            if (g[i] - targets.fixed[k]).norm() > 1e-9 * scale {
                return Err(Error::InconsistentConstraints(format!(
                    "node {i} is pinned twice with different targets"
                )));
            }
        }

        let gflat: Vec<f64> = g.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        let ag = a.mul_vec(&gflat);
        let mut rhs = vec![0.0; self.reduced.n];
        for i in 0..self.n_nodes {
            if let Some(r) = self.node_map[i] {
                for c in 0..3 {
                    rhs[3 * r + c] += b[3 * i + c] - ag[3 * i + c];
                }
            }
        }
        self.reduced.fill_zero();
        for (src, &dst) in self.entry_map.iter().enumerate() {
            if dst != usize::MAX {
                self.reduced.values[dst] += a.values[src];
            }
        }
        let y = self.solver.solve(&self.reduced, &rhs)?;

        let mut dv = gflat;
        for i in 0..self.n_nodes {
            if let Some(r) = self.node_map[i] {
                for c in 0..3 {
                    dv[3 * i + c] += y[3 * r + c];
                }
            }
        }

        // ρ = A Δv − b = Hᵀλ, peeled from the leaves towards the roots
        let adv = a.mul_vec(&dv);
        let mut rho: Vec<Point> = (0..self.n_nodes)
            .map(|i| Point::new(adv[3 * i] - b[3 * i], adv[3 * i + 1] - b[3 * i + 1], adv[3 * i + 2] - b[3 * i + 2]))
            .collect();
        let mut fixed_lambda = vec![Point::zeros(); self.constraints.fixed.len()];
        let mut bilateral_lambda = vec![Point::zeros(); self.constraints.bilateral.len()];
        for &u in self.order.iter().rev() {
            match self.links[u] {
                Link::Root => {}
                Link::Ground(k) => fixed_lambda[k] = rho[u],
                Link::Pair {
                    k,
                    parent,
                    child_first,
                } => {
                    let r = rho[u];
                    bilateral_lambda[k] = if child_first { r } else { -r };
                    rho[parent] += r;
                }
            }
        }
        Ok(ConstraintSolution {
            dv,
            fixed_lambda,
            bilateral_lambda,
        })
    }
}
