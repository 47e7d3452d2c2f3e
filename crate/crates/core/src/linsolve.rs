//! Linear solvers for the per-step block system and for SPD systems.
//!
//! General systems are factorized once with a sparse LU (partial pivoting) and
//! the factorization is reused for every right-hand side. Above a size limit, or
//! when the factorization fails, an ILU(0)-preconditioned BiCGSTAB iteration is
//! used instead. Every accepted solution has its residual recomputed against
//! the original matrix.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseRowMat, SymbolicSparseRowMat};

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, SparseMatrix};

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Required relative residual `‖Ax − b‖₂ / ‖b‖₂`.
    pub rel_tol: f64,
    /// Systems with more unknowns than this use the iterative solver.
    pub direct_max_unknowns: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, direct_max_unknowns: 400_000, max_iterations: 50_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DirectLu,
    IluBicgstab,
}

pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let bn = norm2(b);
    if bn == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / bn
    }
}

enum Backend {
    Direct(Box<Lu<usize, f64>>),
    Iterative(Ilu0),
}

/// A factorized general sparse matrix, reusable across right-hand sides.
///
/// Solves take `&self` and allocate their own work space, so one solver may be
/// shared between threads.
pub struct LinearSolver {
    matrix: SparseMatrix,
    backend: Backend,
    opts: SolverOptions,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver").field("n", &self.matrix.nrows()).field("method", &self.method()).finish()
    }
}

impl LinearSolver {
    pub fn new(matrix: SparseMatrix, opts: SolverOptions) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidArgument(format!(
                "cannot factorize a {}x{} matrix",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let backend = if matrix.nrows() <= opts.direct_max_unknowns {
            match lu_factorize(&matrix) {
                Some(lu) => Backend::Direct(Box::new(lu)),
                None => Backend::Iterative(Ilu0::new(&matrix)?),
            }
        } else {
            Backend::Iterative(Ilu0::new(&matrix)?)
        };
        Ok(Self { matrix, backend, opts })
    }

    pub fn method(&self) -> SolveMethod {
        match self.backend {
            Backend::Direct(_) => SolveMethod::DirectLu,
            Backend::Iterative(_) => SolveMethod::IluBicgstab,
        }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.nrows();
        if b.len() != n {
            return Err(Error::InvalidArgument(format!("right-hand side has length {}, expected {n}", b.len())));
        }
        if norm2(b) == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let x = match &self.backend {
            Backend::Direct(lu) => {
                let mut x = lu_solve(lu, b);
                // a few rounds of iterative refinement if pivoting lost accuracy
                for _ in 0..3 {
                    if relative_residual(&self.matrix, &x, b) <= self.opts.rel_tol {
                        break;
                    }
                    let ax = self.matrix.mul_vec(&x);
                    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
                    let dx = lu_solve(lu, &r);
                    x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
                }
                x
            }
            Backend::Iterative(ilu) => bicgstab(&self.matrix, ilu, b, &self.opts)?,
        };
        let res = relative_residual(&self.matrix, &x, b);
        if !(res <= self.opts.rel_tol) {
            return Err(Error::Solver {
                message: format!("{:?} did not reach the tolerance", self.method()),
                residual: res,
            });
        }
        Ok(x)
    }
}

fn lu_factorize(m: &SparseMatrix) -> Option<Lu<usize, f64>> {
    let sym = SymbolicSparseRowMat::<usize>::new_checked(
        m.nrows(),
        m.ncols(),
        m.row_ptr().to_vec(),
        None,
        m.col_idx().to_vec(),
    );
    let mat = SparseRowMat::<usize, f64>::new(sym, m.values().to_vec());
    mat.sp_lu().ok()
}

fn lu_solve(lu: &Lu<usize, f64>, b: &[f64]) -> Vec<f64> {
    let mut col = faer::Col::<f64>::from_fn(b.len(), |i| b[i]);
    lu.solve_in_place(col.as_mut());
    (0..b.len()).map(|i| col[i]).collect()
}

/// One-shot solve of a general sparse system.
pub fn solve(matrix: &SparseMatrix, b: &[f64], opts: SolverOptions) -> Result<Vec<f64>> {
    LinearSolver::new(matrix.clone(), opts)?.solve(b)
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite `k`.
pub fn spd_solve(k: &SparseMatrix, b: &[f64], opts: SolverOptions) -> Result<Vec<f64>> {
    let n = k.nrows();
    if k.ncols() != n || b.len() != n {
        return Err(Error::InvalidArgument("spd_solve: dimension mismatch".into()));
    }
    let bn = norm2(b);
    if bn == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag = k.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Solver { message: format!("non-positive diagonal entry at row {i}"), residual: f64::NAN });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    // target slightly below the contract so the recomputed residual passes
    let target = 0.5 * opts.rel_tol * bn;
    for _ in 0..opts.max_iterations {
        k.mul_vec_into(&p, &mut kp);
        let pkp = dot(&p, &kp);
        if !(pkp > 0.0) {
            return Err(Error::Solver { message: "matrix is not positive definite".into(), residual: norm2(&r) / bn });
        }
        let alpha = rz / pkp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        if norm2(&r) <= target {
            let res = relative_residual(k, &x, b);
            if res <= opts.rel_tol {
                return Ok(x);
            }
            // drifted recursive residual: restart from the true one
            let kx = k.mul_vec(&x);
            r = b.iter().zip(&kx).map(|(p, q)| p - q).collect();
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver {
        message: format!("conjugate gradients did not converge in {} iterations", opts.max_iterations),
        residual: relative_residual(k, &x, b),
    })
}

/// Incomplete LU factorization with the sparsity pattern of the input.
struct Ilu0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    fn new(m: &SparseMatrix) -> Result<Self> {
        let n = m.nrows();
        let row_ptr = m.row_ptr().to_vec();
        let col_idx = m.col_idx().to_vec();
        let mut values = m.values().to_vec();
        let mut diag_pos = Vec::with_capacity(n);
        for i in 0..n {
            let pos = col_idx[row_ptr[i]..row_ptr[i + 1]].binary_search(&i).map_err(|_| Error::Solver {
                message: format!("ILU(0): missing diagonal in row {i}"),
                residual: f64::NAN,
            })?;
            diag_pos.push(row_ptr[i] + pos);
        }
        let mut where_in_row = vec![usize::MAX; n];
        for i in 0..n {
            for p in row_ptr[i]..row_ptr[i + 1] {
                where_in_row[col_idx[p]] = p;
            }
            for p in row_ptr[i]..diag_pos[i] {
                let k = col_idx[p];
                let pivot = values[diag_pos[k]];
                if pivot == 0.0 {
                    return Err(Error::Solver {
                        message: format!("ILU(0): zero pivot at row {k}"),
                        residual: f64::NAN,
                    });
                }
                values[p] /= pivot;
                let lik = values[p];
                for q in diag_pos[k] + 1..row_ptr[k + 1] {
                    let j = col_idx[q];
                    let target = where_in_row[j];
                    if target != usize::MAX {
                        values[target] -= lik * values[q];
                    }
                }
            }
            for p in row_ptr[i]..row_ptr[i + 1] {
                where_in_row[col_idx[p]] = usize::MAX;
            }
            if values[diag_pos[i]] == 0.0 {
                return Err(Error::Solver { message: format!("ILU(0): zero pivot at row {i}"), residual: f64::NAN });
            }
        }
        Ok(Self { row_ptr, col_idx, values, diag_pos })
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut y = r.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in self.row_ptr[i]..self.diag_pos[i] {
                s -= self.values[p] * y[self.col_idx[p]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in self.diag_pos[i] + 1..self.row_ptr[i + 1] {
                s -= self.values[p] * y[self.col_idx[p]];
            }
            y[i] = s / self.values[self.diag_pos[i]];
        }
        y
    }
}

fn bicgstab(a: &SparseMatrix, pre: &Ilu0, b: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    let n = b.len();
    let bn = norm2(b);
    let target = 0.5 * opts.rel_tol * bn;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for _ in 0..opts.max_iterations {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = pre.apply(&p);
        v = a.mul_vec(&y);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm2(&s) <= target {
            x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi += alpha * yi);
            return Ok(x);
        }
        let z = pre.apply(&s);
        let t = a.mul_vec(&z);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= target {
            return Ok(x);
        }
        if !omega.is_finite() || omega == 0.0 {
            break;
        }
    }
    Err(Error::Solver { message: "BiCGSTAB did not converge".into(), residual: relative_residual(a, &x, b) })
}

/// The per-step system `[[δ₀M, τA], [−τA_w, τM]]` acting on `(uⁿ, wⁿ)`.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    matrix: SparseMatrix,
    n: usize,
}

impl BlockSystem {
    pub fn new(
        delta0: f64,
        tau: f64,
        mass: &SparseMatrix,
        stiffness: &SparseMatrix,
        weighted_stiffness: &SparseMatrix,
    ) -> Result<Self> {
        if !(delta0 > 0.0) || !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("block system needs δ₀ > 0 and τ > 0 (got {delta0}, {tau})")));
        }
        let n = mass.nrows();
        for m in [mass, stiffness, weighted_stiffness] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidArgument("block system blocks have inconsistent dimensions".into()));
            }
        }
        let matrix = SparseMatrix::block_2x2([
            [&mass.scaled(delta0), &stiffness.scaled(tau)],
            [&weighted_stiffness.scaled(-tau), &mass.scaled(tau)],
        ]);
        Ok(Self { matrix, n })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn block_size(&self) -> usize {
        self.n
    }

    pub fn factorize(&self, opts: SolverOptions) -> Result<LinearSolver> {
        LinearSolver::new(self.matrix.clone(), opts)
    }
}
