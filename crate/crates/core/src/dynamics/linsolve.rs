//! Sparse symmetric linear solvers.

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::cholesky::llt::factor::LltRegularization;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, LltRef, SymbolicCholesky,
    SymmetricOrdering,
};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side, Spec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Sparse Cholesky with a fill-reducing ordering.
    Cholesky,
    /// Jacobi-preconditioned conjugate gradient.
    Pcg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// Relative residual target ‖Ax − b‖ ≤ tol·‖b‖.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Cholesky,
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(a: &CscMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    norm(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>())
}

/// Solver bound to one sparsity pattern. The symbolic factorisation is
/// computed on first use and reused while the pattern stays the same.
#[derive(Debug, Default)]
pub struct LinearSolver {
    pub options: SolverOptions,
    symbolic: Option<(Vec<usize>, Vec<usize>, SymbolicCholesky<usize>)>,
    factor: Vec<f64>,
}

impl LinearSolver {
    pub fn new(options: SolverOptions) -> Self {
        LinearSolver {
            options,
            symbolic: None,
            factor: Vec::new(),
        }
    }

    pub fn solve(&mut self, a: &CscMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != a.n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side of length {} for a {}×{} system",
                b.len(),
                a.n,
                a.n
            )));
        }
        if a.n == 0 {
            return Ok(Vec::new());
        }
        let x = match self.options.kind {
            SolverKind::Cholesky => self.cholesky(a, b)?,
            SolverKind::Pcg => pcg(a, b, self.options.tolerance, self.options.max_iterations)?,
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let r = residual(a, &x, b);
        let bn = norm(b);
        // direct solves are checked loosely: they only fail on (near-)singular input
        let limit = match self.options.kind {
            SolverKind::Cholesky => 1e-6 * bn.max(f64::MIN_POSITIVE),
            SolverKind::Pcg => 1.01 * self.options.tolerance * bn,
        };
        if r > limit && r > 0.0 {
            return Err(Error::Singular(format!("residual {r:e} against ‖b‖ = {bn:e}")));
        }
        Ok(x)
    }

    fn cholesky(&mut self, a: &CscMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let same = matches!(&self.symbolic, Some((cp, ri, _)) if *cp == a.col_ptr && *ri == a.row_idx);
        if !same {
            let pattern = SymbolicSparseColMatRef::new_checked(a.n, a.n, &a.col_ptr, None, &a.row_idx);
            let symbolic = factorize_symbolic_cholesky(
                pattern,
                Side::Lower,
                SymmetricOrdering::Amd,
                CholeskySymbolicParams::default(),
            )
            .map_err(|e| Error::Singular(format!("symbolic factorisation failed: {e:?}")))?;
            self.factor = vec![0.0; symbolic.len_val()];
            self.symbolic = Some((a.col_ptr.clone(), a.row_idx.clone(), symbolic));
        }
        let (_, _, symbolic) = self.symbolic.as_ref().expect("symbolic factor present");
        let mat = SparseColMatRef::new(
            SymbolicSparseColMatRef::new_checked(a.n, a.n, &a.col_ptr, None, &a.row_idx),
            &a.values,
        );
        let par = Par::Seq;
        let req = StackReq::any_of(&[
            symbolic.factorize_numeric_llt_scratch::<f64>(par, Spec::default()),
            symbolic.factorize_numeric_ldlt_scratch::<f64>(par, Spec::default()),
            symbolic.solve_in_place_scratch::<f64>(1, par),
        ]);
        let mut mem = MemBuffer::new(req);
        let stack = MemStack::new(&mut mem);
        let mut x = b.to_vec();
        let rhs = MatMut::from_column_major_slice_mut(&mut x, a.n, 1);

        let llt = symbolic.factorize_numeric_llt(
            &mut self.factor,
            mat,
            Side::Lower,
            LltRegularization::default(),
            par,
            stack,
            Spec::default(),
        );
        match llt {
            Ok(_) => {
                LltRef::new(symbolic, &self.factor).solve_in_place_with_conj(Conj::No, rhs, par, stack);
            }
            Err(_) => {
                // indefinite systems can still be solved without pivoting in most cases
                symbolic
                    .factorize_numeric_ldlt(
                        &mut self.factor,
                        mat,
                        Side::Lower,
                        LdltRegularization::default(),
                        par,
                        stack,
                        Spec::default(),
                    )
                    .map_err(|e| Error::Singular(format!("LDLᵀ factorisation failed: {e:?}")))?;
                LdltRef::new(symbolic, &self.factor).solve_in_place_with_conj(Conj::No, rhs, par, stack);
            }
        }
        Ok(x)
    }
}

/// Jacobi-preconditioned conjugate gradient for symmetric positive definite A.
pub fn pcg(a: &CscMatrix, b: &[f64], tol: f64, max_iterations: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Singular("non-positive diagonal entry".into()));
    }
    let bn = norm(b);
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iterations {
        if norm(&r) <= tol * bn {
            return Ok(x);
        }
        a.mul_vec_into(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Singular(format!("curvature pᵀAp = {pap:e}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm(&r);
    if res <= tol * bn {
        return Ok(x);
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        residual: res / bn,
    })
}

/// One-shot solve of A x = b.
pub fn linear_solve(a: &CscMatrix, b: &[f64], options: SolverOptions) -> Result<Vec<f64>> {
    LinearSolver::new(options).solve(a, b)
}
