//! Implicit Euler in velocity-increment form with constraint elimination.

use serde::{Deserialize, Serialize};

use super::constraints::{ConstrainedSolver, ConstraintSet, ConstraintTargets};
use super::linsolve::{LinearSolver, SolverOptions};
use crate::error::{Error, Result};
use crate::materials::{ElementSlots, FemModel};
use crate::mesh::Point;
use crate::sparse::{BlockPattern, CscMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// Rayleigh mass coefficient α [1/s].
    pub rayleigh_mass: f64,
    /// Rayleigh stiffness coefficient β [s].
    pub rayleigh_stiffness: f64,
    pub newton_iters: usize,
    pub solver: SolverOptions,
    pub gravity: [f64; 3],
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 0.01,
            rayleigh_mass: 0.1,
            rayleigh_stiffness: 0.1,
            newton_iters: 1,
            solver: SolverOptions::default(),
            gravity: [0.0, 0.0, -9.81],
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.rayleigh_mass >= 0.0 && self.rayleigh_stiffness >= 0.0) {
            return bad("Rayleigh coefficients must be non-negative".into());
        }
        if self.newton_iters == 0 {
            return bad("newton_iters must be at least 1".into());
        }
        if !(self.solver.tolerance > 0.0) {
            return bad("solver tolerance must be positive".into());
        }
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return bad("gravity must be finite".into());
        }
        Ok(())
    }

    pub fn gravity(&self) -> Point {
        Point::from(self.gravity)
    }
}

/// Positions and velocities of every node of every body.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanicalState {
    pub q: Vec<Point>,
    pub v: Vec<Point>,
}

impl MechanicalState {
    pub fn at_rest(q: Vec<Point>) -> Self {
        let v = vec![Point::zeros(); q.len()];
        MechanicalState { q, v }
    }
}

/// One deformable body: elements plus nodal masses, occupying global nodes
/// `offset..offset + masses.len()`.
#[derive(Debug, Clone)]
pub struct Body {
    pub name: String,
    pub model: FemModel,
    pub masses: Vec<f64>,
    pub offset: usize,
}

#[derive(Debug, Clone, Default)]
pub struct StepReport {
    /// Constraint forces on the pinned nodes [N].
    pub fixed_reactions: Vec<Point>,
    /// Force exerted by each pair on its first node [N].
    pub bilateral_forces: Vec<Point>,
    pub max_fixed_drift: f64,
    pub max_pair_gap: f64,
}

pub struct Integrator {
    pub config: IntegratorConfig,
    pub bodies: Vec<Body>,
    mass: Vec<f64>,
    slots: Vec<ElementSlots>,
    stiffness: CscMatrix,
    system: CscMatrix,
    solver: ConstrainedSolver,
}

fn flatten(p: &[Point]) -> Vec<f64> {
    p.iter().flat_map(|x| [x.x, x.y, x.z]).collect()
}

impl Integrator {
    pub fn new(bodies: Vec<Body>, constraints: ConstraintSet, config: IntegratorConfig) -> Result<Self> {
        config.validate()?;
        let n: usize = bodies.iter().map(|b| b.masses.len()).sum();
        let mut expected = 0;
        for b in &bodies {
            if b.offset != expected {
                return Err(Error::DimensionMismatch(format!("body `{}` starts at node {}, expected {expected}", b.name, b.offset)));
            }
            expected += b.masses.len();
            if b.masses.iter().any(|m| !(*m > 0.0)) {
                return Err(Error::InvalidParameter(format!("body `{}` has a non-positive nodal mass", b.name)));
            }
        }
        let mut pattern = BlockPattern::from_elements(n, std::iter::empty());
        for b in &bodies {
            let nodes = b.model.element_nodes(b.offset);
            pattern.extend(nodes.iter().map(|t| &t[..]));
        }
        let slots = bodies.iter().map(|b| b.model.slots(&pattern, b.offset)).collect();
        let mass = bodies.iter().flat_map(|b| b.masses.iter().copied()).collect();
        let solver = ConstrainedSolver::new(&pattern, constraints, LinearSolver::new(config.solver))?;
        Ok(Integrator {
            config,
            bodies,
            mass,
            slots,
            stiffness: pattern.zeros(),
            system: pattern.zeros(),
            solver,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.mass.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn constraints(&self) -> &ConstraintSet {
        self.solver.constraints()
    }

    /// Internal forces at `q`; the stiffness is left in `self.stiffness`.
    fn internal(&mut self, q: &[Point]) -> Vec<Point> {
        let mut f = vec![Point::zeros(); q.len()];
        self.stiffness.fill_zero();
        for (b, body) in self.bodies.iter().enumerate() {
            let local = &q[body.offset..body.offset + body.masses.len()];
            body.model
                .assemble_into(local, body.offset, &self.slots[b], &mut f, &mut self.stiffness);
        }
        f
    }

    pub fn internal_forces(&mut self, q: &[Point]) -> (Vec<Point>, CscMatrix) {
        let f = self.internal(q);
        (f, self.stiffness.clone())
    }

    /// Sum of elastic energies at `q`.
    pub fn elastic_energy(&self, q: &[Point]) -> f64 {
        self.bodies
            .iter()
            .map(|b| b.model.energy(&q[b.offset..b.offset + b.masses.len()]))
            .sum()
    }

    pub fn kinetic_energy(&self, v: &[Point]) -> f64 {
        self.mass.iter().zip(v).map(|(m, v)| 0.5 * m * v.norm_squared()).sum()
    }

    /// A = (1 + dt α) M + (dt β + dt²) K, b = dt (f_ext + f_int − C v) − dt² K v.
    /// Gravity is added to `f_ext` from the lumped masses.
    pub fn assemble_system(&mut self, state: &MechanicalState, f_ext: &[Point]) -> Result<(CscMatrix, Vec<f64>)> {
        let b = self.assemble(state, f_ext)?;
        Ok((self.system.clone(), b))
    }

    fn check_dims(&self, state: &MechanicalState, f_ext: &[Point]) -> Result<()> {
        let n = self.n_nodes();
        if state.q.len() != n || state.v.len() != n || f_ext.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "state ({}, {}) and load ({}) sizes do not match {n} nodes",
                state.q.len(),
                state.v.len(),
                f_ext.len()
            )));
        }
        Ok(())
    }

    fn assemble(&mut self, state: &MechanicalState, f_ext: &[Point]) -> Result<Vec<f64>> {
        self.check_dims(state, f_ext)?;
        let c = &self.config;
        let (dt, alpha, beta) = (c.dt, c.rayleigh_mass, c.rayleigh_stiffness);
        let g = c.gravity();
        let f_int = self.internal(&state.q);
        let v = flatten(&state.v);
        let kv = self.stiffness.mul_vec(&v);
        let mut b = vec![0.0; v.len()];
        for i in 0..self.n_nodes() {
            let m = self.mass[i];
            for d in 0..3 {
                let k = 3 * i + d;
                let cv = alpha * m * v[k] + beta * kv[k];
                b[k] = dt * (f_ext[i][d] + m * g[d] + f_int[i][d] - cv) - dt * dt * kv[k];
            }
        }
        self.fill_system(1.0 + dt * alpha, dt * beta + dt * dt, None);
        Ok(b)
    }

    /// system = s_m M + s_k K (+ extra K-like matrix scaled into the same pattern).
    fn fill_system(&mut self, s_m: f64, s_k: f64, damping: Option<(&[f64], f64)>) {
        self.system.values.copy_from_slice(&self.stiffness.values);
        self.system.values.iter_mut().for_each(|x| *x *= s_k);
        if let Some((k0, s)) = damping {
            for (x, k) in self.system.values.iter_mut().zip(k0) {
                *x += s * k;
            }
        }
        for i in 0..self.n_nodes() {
            for d in 0..3 {
                let col = 3 * i + d;
                let range = self.system.col_ptr[col]..self.system.col_ptr[col + 1];
                let pos = self.system.row_idx[range.clone()].binary_search(&col).expect("diagonal in pattern");
                self.system.values[range.start + pos] += s_m * self.mass[i];
            }
        }
    }

    /// Advances `state` by one step under external nodal forces `f_ext`.
    pub fn step(&mut self, state: &mut MechanicalState, f_ext: &[Point]) -> Result<StepReport> {
        let dt = self.config.dt;
        let b = self.assemble(state, f_ext)?;
        let targets = self.solver.constraints().velocity_targets(&state.q, &state.v, dt);
        let sol = self.solver.solve(&self.system, &b, &targets)?;
        let mut dv = sol.dv;
        let mut fixed_lambda = sol.fixed_lambda;
        let mut pair_lambda = sol.bilateral_lambda;

        if self.config.newton_iters > 1 {
            let (alpha, beta) = (self.config.rayleigh_mass, self.config.rayleigh_stiffness);
            let k0 = self.stiffness.values.clone();
            let k0_mat = self.stiffness.clone();
            let zero_targets: ConstraintTargets = self.solver.constraints().homogeneous_targets();
            for _ in 1..self.config.newton_iters {
                let v_new: Vec<Point> = (0..self.n_nodes())
                    .map(|i| state.v[i] + Point::new(dv[3 * i], dv[3 * i + 1], dv[3 * i + 2]))
                    .collect();
                let q_new: Vec<Point> = state.q.iter().zip(&v_new).map(|(q, v)| q + dt * v).collect();
                let f_int = self.internal(&q_new);
                let vn = flatten(&v_new);
                let k0v = k0_mat.mul_vec(&vn);
                let g = self.config.gravity();
                let mut r = vec![0.0; vn.len()];
                for i in 0..self.n_nodes() {
                    let m = self.mass[i];
                    for d in 0..3 {
                        let k = 3 * i + d;
                        let cv = alpha * m * vn[k] + beta * k0v[k];
                        r[k] = dt * (f_ext[i][d] + m * g[d] + f_int[i][d] - cv) - m * dv[k];
                    }
                }
                // Jacobian: (1 + dt α) M + dt β K0 + dt² K(q_new)
                self.fill_system(1.0 + dt * alpha, dt * dt, Some((&k0, dt * beta)));
                let corr = self.solver.solve(&self.system, &r, &zero_targets)?;
                for (x, d) in dv.iter_mut().zip(&corr.dv) {
                    *x += d;
                }
                for (l, d) in fixed_lambda.iter_mut().zip(&corr.fixed_lambda) {
                    *l += d;
                }
                for (l, d) in pair_lambda.iter_mut().zip(&corr.bilateral_lambda) {
                    *l += d;
                }
            }
        }

        for i in 0..self.n_nodes() {
            state.v[i] += Point::new(dv[3 * i], dv[3 * i + 1], dv[3 * i + 2]);
            state.q[i] += dt * state.v[i];
        }
        if state.q.iter().chain(&state.v).any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite);
        }
        let (drift, gap) = self.solver.constraints().violation(&state.q);
        Ok(StepReport {
            fixed_reactions: fixed_lambda.iter().map(|l| l / dt).collect(),
            bilateral_forces: pair_lambda.iter().map(|l| l / dt).collect(),
            max_fixed_drift: drift,
            max_pair_gap: gap,
        })
    }
}
