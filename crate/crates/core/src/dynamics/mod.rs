//! Constrained implicit dynamics.

mod constraints;
mod integrator;
mod linsolve;
mod mass;

pub use constraints::{ConstrainedSolver, ConstraintSet, ConstraintSolution, ConstraintTargets};
pub use integrator::{Body, Integrator, IntegratorConfig, MechanicalState, StepReport};
pub use linsolve::{linear_solve, pcg, LinearSolver, SolverKind, SolverOptions};
pub use mass::{lump_mass, MassModel};
