//! Sparse matrices and linear solvers.
//!
//! Direct solves go through a sparse LU (faer) whose symbolic analysis is
//! cached per sparsity pattern. Saddle-point systems with a few dense border
//! columns are reduced to the sparse block by a Schur complement.

use std::sync::Mutex;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Mat;

use crate::dense;
use crate::error::{Error, Result};
use crate::par;

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row `(col, value)` lists already sorted by column.
    pub fn from_rows<I>(n: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = Vec<(usize, f64)>>,
    {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        assert_eq!(row_ptr.len(), n + 1, "row count mismatch");
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().cloned().zip(self.values[span].iter().cloned())
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .binary_search(&c)
            .ok()
            .map(|k| self.values[span.start + k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).unwrap_or(0.0)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        par::map_collect(self.n, |r| self.row(r).map(|(c, v)| v * x[c]).sum())
    }

    /// Same pattern with `shift[i]` added to each diagonal entry (which must exist).
    pub fn shift_diagonal(&self, shift: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for r in 0..self.n {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            let k = self.col_idx[span.clone()].binary_search(&r).expect("diagonal entry missing");
            out.values[span.start + k] += shift[r];
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == Some(v)))
    }

    /// Column view of the transpose; equals the matrix itself when symmetric.
    fn as_faer_transpose(&self) -> SparseColMatRef<'_, usize, f64> {
        SparseColMatRef::new(
            SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.row_ptr, None, &self.col_idx),
            &self.values,
        )
    }
}

/// Memoized symbolic LU analysis for one sparsity pattern.
#[derive(Debug, Default)]
pub struct SymbolicCache {
    slot: Mutex<Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>>,
}

impl SymbolicCache {
    fn get(&self, m: &CsrMatrix) -> Result<SymbolicLu<usize>> {
        let mut slot = self.slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((ptr, idx, sym)) = slot.as_ref() {
            if *ptr == m.row_ptr && *idx == m.col_idx {
                return Ok(sym.clone());
            }
        }
        let sym = SymbolicLu::try_new(m.as_faer_transpose().symbolic())
            .map_err(|e| Error::LinearSolve(format!("symbolic analysis: {e:?}")))?;
        *slot = Some((m.row_ptr.clone(), m.col_idx.clone(), sym.clone()));
        Ok(sym)
    }
}

/// Sparse LU factors of a symmetric matrix, solved with two rounds of
/// iterative refinement.
pub struct SparseLu {
    matrix: CsrMatrix,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.matrix.n).finish()
    }
}

impl SparseLu {
    /// Factor a structurally and numerically symmetric matrix.
    pub fn factor(matrix: CsrMatrix, cache: &SymbolicCache) -> Result<Self> {
        let sym = cache.get(&matrix)?;
        let lu = Lu::try_new_with_symbolic(sym, matrix.as_faer_transpose())
            .map_err(|e| Error::LinearSolve(format!("numeric factorization: {e:?}")))?;
        Ok(SparseLu { matrix, lu })
    }

    pub fn n(&self) -> usize {
        self.matrix.n
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.raw_solve(b);
        for _ in 0..2 {
            let ax = self.matrix.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let dx = self.raw_solve(&r);
            par::axpy(1.0, &dx, &mut x);
        }
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::LinearSolve("non-finite solution".into()))
        }
    }
}

/// Solver for `[H C; Cᵀ 0] [x; y] = [f; g]` with a sparse symmetric `H` and a
/// few dense columns `C`.
#[derive(Debug)]
pub struct BorderedSolver<'a> {
    h: &'a SparseLu,
    border: Vec<Vec<f64>>,
    h_inv_border: Vec<Vec<f64>>,
    schur: Vec<f64>,
}

impl<'a> BorderedSolver<'a> {
    pub fn new(h: &'a SparseLu, border: Vec<Vec<f64>>) -> Result<Self> {
        let m = border.len();
        let h_inv_border = border.iter().map(|c| h.solve(c)).collect::<Result<Vec<_>>>()?;
        let mut schur = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                schur[i * m + j] = par::dot(&border[i], &h_inv_border[j]);
            }
        }
        // symmetrize against round-off
        for i in 0..m {
            for j in i + 1..m {
                let s = 0.5 * (schur[i * m + j] + schur[j * m + i]);
                schur[i * m + j] = s;
                schur[j * m + i] = s;
            }
        }
        Ok(BorderedSolver {
            h,
            border,
            h_inv_border,
            schur,
        })
    }

    fn raw_solve(&self, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.border.len();
        let hf = self.h.solve(f)?;
        let rhs: Vec<f64> = (0..m).map(|i| par::dot(&self.border[i], &hf) - g[i]).collect();
        let y = if m == 0 {
            Vec::new()
        } else {
            dense::solve(&self.schur, &rhs, m).ok_or_else(|| Error::LinearSolve("singular Schur complement".into()))?
        };
        let mut x = hf;
        for (j, yj) in y.iter().enumerate() {
            par::axpy(-yj, &self.h_inv_border[j], &mut x);
        }
        Ok((x, y))
    }

    fn apply(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut top = self.h.matrix().matvec(x);
        for (j, yj) in y.iter().enumerate() {
            par::axpy(*yj, &self.border[j], &mut top);
        }
        let bottom = self.border.iter().map(|c| par::dot(c, x)).collect();
        (top, bottom)
    }

    /// Solve with two rounds of refinement on the full bordered system.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut x, mut y) = self.raw_solve(f, g)?;
        for _ in 0..2 {
            let (t, b) = self.apply(&x, &y);
            let rf: Vec<f64> = f.iter().zip(&t).map(|(a, b)| a - b).collect();
            let rg: Vec<f64> = g.iter().zip(&b).map(|(a, b)| a - b).collect();
            let (dx, dy) = self.raw_solve(&rf, &rg)?;
            par::axpy(1.0, &dx, &mut x);
            for (a, b) in y.iter_mut().zip(&dy) {
                *a += b;
            }
        }
        Ok((x, y))
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct IterativeSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    par::dot(v, v).sqrt()
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite `a`.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], rtol: f64, max_iter: usize) -> Result<IterativeSolution> {
    let n = a.n;
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(IterativeSolution {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = par::map_collect(n, |i| inv_diag[i] * r[i]);
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let ap = a.matvec(&p);
        let pap = par::dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolve("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        par::axpy(alpha, &p, &mut x);
        par::axpy(-alpha, &ap, &mut r);
        let res = norm(&r) / b_norm;
        history.push(res);
        if res <= rtol {
            return Ok(IterativeSolution {
                x,
                iterations: it,
                residual: res,
            });
        }
        z = par::map_collect(n, |i| inv_diag[i] * r[i]);
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = par::map_collect(n, |i| z[i] + beta * p[i]);
    }
    Err(Error::NoConvergence {
        what: "conjugate gradients",
        iterations: max_iter,
        residual: history.last().cloned().unwrap_or(f64::NAN),
        history,
    })
}

/// Unpreconditioned MINRES for symmetric, possibly indefinite, `a`.
pub fn minres(a: &CsrMatrix, b: &[f64], rtol: f64, max_iter: usize) -> Result<IterativeSolution> {
    let n = a.n;
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(IterativeSolution {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut v_old = vec![0.0; n];
    let mut v: Vec<f64> = b.iter().map(|b| b / b_norm).collect();
    // Lanczos coupling between v_{k-1} and v_k; absent on the first step
    let mut beta = 0.0;
    let (mut c_old, mut s_old, mut c, mut s) = (1.0, 0.0, 1.0, 0.0);
    let mut w_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut eta = b_norm;
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let av = a.matvec(&v);
        let alpha = par::dot(&v, &av);
        let mut v_new: Vec<f64> = par::map_collect(n, |i| av[i] - alpha * v[i] - beta * v_old[i]);
        let beta_new = norm(&v_new);
        let delta = c * alpha - c_old * s * beta;
        let rho2 = s * alpha + c_old * c * beta;
        let rho3 = s_old * beta;
        let rho1 = (delta * delta + beta_new * beta_new).sqrt();
        if rho1 == 0.0 {
            return Err(Error::LinearSolve("MINRES breakdown".into()));
        }
        let c_new = delta / rho1;
        let s_new = beta_new / rho1;
        let w_new: Vec<f64> = par::map_collect(n, |i| (v[i] - rho3 * w_old[i] - rho2 * w[i]) / rho1);
        par::axpy(c_new * eta, &w_new, &mut x);
        eta *= -s_new;
        let res = eta.abs() / b_norm;
        history.push(res);
        if res <= rtol {
            return Ok(IterativeSolution {
                x,
                iterations: it,
                residual: res,
            });
        }
        if beta_new > 0.0 {
            for e in v_new.iter_mut() {
                *e /= beta_new;
            }
        }
        v_old = std::mem::replace(&mut v, v_new);
        w_old = std::mem::replace(&mut w, w_new);
        c_old = c;
        s_old = s;
        c = c_new;
        s = s_new;
        beta = beta_new;
    }
    Err(Error::NoConvergence {
        what: "MINRES",
        iterations: max_iter,
        residual: history.last().cloned().unwrap_or(f64::NAN),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix {
        CsrMatrix::from_rows(
            n,
            (0..n).map(|i| {
                let mut row = Vec::new();
                if i > 0 {
                    row.push((i - 1, -1.0));
                }
                row.push((i, 2.0 + shift));
                if i + 1 < n {
                    row.push((i + 1, -1.0));
                }
                row
            }),
        )
    }

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.matvec(x);
        ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn lu_solves_and_reuses_symbolic() {
        let cache = SymbolicCache::default();
        let a = laplace_1d(50, 0.1);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).cos()).collect();
        let lu = SparseLu::factor(a.clone(), &cache).unwrap();
        assert!(residual(&a, &lu.solve(&b).unwrap(), &b) < 1e-12);
        // indefinite matrix with the same pattern
        let h = a.shift_diagonal(&vec![-1.5; 50]);
        let lu = SparseLu::factor(h.clone(), &cache).unwrap();
        assert!(residual(&h, &lu.solve(&b).unwrap(), &b) < 1e-10);
    }

    #[test]
    fn bordered_matches_dense() {
        let n = 6;
        let cache = SymbolicCache::default();
        let h = laplace_1d(n, -0.5);
        let lu = SparseLu::factor(h.clone(), &cache).unwrap();
        let c = vec![(0..n).map(|i| i as f64 - 2.5).collect::<Vec<_>>()];
        let solver = BorderedSolver::new(&lu, c.clone()).unwrap();
        let f: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let (x, y) = solver.solve(&f, &[0.3]).unwrap();
        let m = n + 1;
        let mut dense_a = vec![0.0; m * m];
        for r in 0..n {
            for (col, v) in h.row(r) {
                dense_a[r * m + col] = v;
            }
            dense_a[r * m + n] = c[0][r];
            dense_a[n * m + r] = c[0][r];
        }
        let mut rhs = f.clone();
        rhs.push(0.3);
        let expect = dense::solve(&dense_a, &rhs, m).unwrap();
        for i in 0..n {
            assert!((x[i] - expect[i]).abs() < 1e-12);
        }
        assert!((y[0] - expect[n]).abs() < 1e-12);
    }

    #[test]
    fn iterative_solvers() {
        let a = laplace_1d(200, 0.05);
        let b: Vec<f64> = (0..200).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let cg = conjugate_gradient(&a, &b, 1e-12, 2000).unwrap();
        assert!(residual(&a, &cg.x, &b) < 1e-9);
        let h = a.shift_diagonal(&vec![-0.3; 200]);
        let mr = minres(&h, &b, 1e-10, 5000).unwrap();
        assert!(residual(&h, &mr.x, &b) < 1e-7, "{}", residual(&h, &mr.x, &b));
        assert!(conjugate_gradient(&laplace_1d(10, -3.0), &b[..10], 1e-10, 50).is_err());
    }
}
