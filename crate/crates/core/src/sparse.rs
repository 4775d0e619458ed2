//! Compressed sparse row matrices and the linear solvers behind one
//! relative-residual contract.
//!
//! Direct solves go through faer's sparse LU. Above
//! [`DIRECT_SOLVER_LIMIT`] unknowns, or on request, restarted GMRES with an
//! ILU(0) right preconditioner is used instead.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

pub const DIRECT_SOLVER_LIMIT: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Triplets are sorted by `(row, col)` with a stable sort before merging,
    /// so the result only depends on the multiset of triplets and the order
    /// of duplicates, never on how they were produced.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= nrows || *c >= ncols) {
            return Err(Error::invalid(format!(
                "triplet ({r}, {c}) outside {nrows}x{ncols} matrix"
            )));
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    /// Rows without any stored entry.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.nrows)
            .filter(|&r| self.row_ptr[r] == self.row_ptr[r + 1])
            .collect()
    }

    /// Writes the matrix in Matrix Market coordinate format (1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut trips = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                trips.push(Triplet::new(r, c, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips)
            .map_err(|e| Error::invalid(format!("cannot convert matrix: {e:?}")))
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||A x - b|| / ||b||`, or the absolute residual when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Direct up to [`DIRECT_SOLVER_LIMIT`] unknowns, iterative above.
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub tol: f64,
    pub max_iters: usize,
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kind: SolverKind::Auto,
            tol: 1e-10,
            max_iters: 5000,
            restart: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    /// Krylov iterations, or refinement sweeps for the direct path.
    pub iterations: usize,
}

pub fn solve(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<SolveOutcome> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::invalid(format!(
            "system is {}x{} with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let direct = match opts.kind {
        SolverKind::Auto => a.nrows() <= DIRECT_SOLVER_LIMIT,
        SolverKind::Direct => true,
        SolverKind::Iterative => false,
    };
    if direct {
        solve_direct(a, b, opts.tol)
    } else {
        gmres(a, b, opts)
    }
}

/// Sparse LU factorization that can be applied to several right-hand sides.
pub struct DirectSolver {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl DirectSolver {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::invalid(format!("matrix is {}x{}", a.nrows(), a.ncols())));
        }
        let lu = a.to_faer()?.sp_lu().map_err(|e| Error::Solver {
            message: format!("sparse LU failed: {e:?}"),
            residual: f64::INFINITY,
        })?;
        Ok(Self { n: a.nrows(), lu })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::zeros(self.n, 1);
        for (i, v) in rhs.iter().enumerate() {
            m[(i, 0)] = *v;
        }
        let sol = self.lu.solve(&m);
        (0..self.n).map(|i| sol[(i, 0)]).collect()
    }
}

fn solve_direct(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<SolveOutcome> {
    let n = a.nrows();
    if norm2(b) == 0.0 {
        return Ok(SolveOutcome {
            x: vec![0.0; n],
            residual: 0.0,
            iterations: 0,
        });
    }
    let lu = DirectSolver::factor(a)?;
    let mut x = lu.solve(b);
    let mut residual = relative_residual(a, &x, b);
    let mut sweeps = 0;
    // iterative refinement for ill-conditioned systems
    while residual > tol && sweeps < 3 && residual.is_finite() {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let dx = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        residual = relative_residual(a, &x, b);
        sweeps += 1;
    }
    if !(residual <= tol) {
        return Err(Error::Solver {
            message: "direct solve did not reach the requested residual".into(),
            residual,
        });
    }
    Ok(SolveOutcome {
        x,
        residual,
        iterations: sweeps,
    })
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for k in lu.row_ptr[r]..lu.row_ptr[r + 1] {
                if lu.col_idx[k] == r {
                    diag[r] = k;
                }
            }
            if diag[r] == usize::MAX {
                return Err(Error::Solver {
                    message: format!("ILU(0): row {r} has no diagonal entry"),
                    residual: f64::INFINITY,
                });
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.col_idx[k]] = k;
            }
            for k in start..end {
                let j = lu.col_idx[k];
                if j >= i {
                    break;
                }
                let pivot = lu.values[diag[j]];
                if pivot == 0.0 {
                    return Err(Error::Solver {
                        message: format!("ILU(0): zero pivot in row {j}"),
                        residual: f64::INFINITY,
                    });
                }
                let factor = lu.values[k] / pivot;
                lu.values[k] = factor;
                for kk in (diag[j] + 1)..lu.row_ptr[j + 1] {
                    let p = pos[lu.col_idx[kk]];
                    if p != usize::MAX {
                        lu.values[p] -= factor * lu.values[kk];
                    }
                }
            }
            for k in start..end {
                pos[lu.col_idx[k]] = usize::MAX;
            }
        }
        Ok(Self { lu, diag })
    }

    /// Solves `(LU) z = r`.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut z = r.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in self.lu.row_ptr[i]..self.diag[i] {
                s -= self.lu.values[k] * z[self.lu.col_idx[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (self.diag[i] + 1)..self.lu.row_ptr[i + 1] {
                s -= self.lu.values[k] * z[self.lu.col_idx[k]];
            }
            z[i] = s / self.lu.values[self.diag[i]];
        }
        z
    }
}

/// Restarted GMRES with ILU(0) right preconditioning.
pub fn gmres(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<SolveOutcome> {
    let n = a.nrows();
    let nb = norm2(b);
    if nb == 0.0 {
        return Ok(SolveOutcome {
            x: vec![0.0; n],
            residual: 0.0,
            iterations: 0,
        });
    }
    let prec = Ilu0::new(a)?;
    let m = opts.restart.max(1);
    let mut x = vec![0.0; n];
    let mut iters = 0;
    while iters < opts.max_iters {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm2(&r);
        if beta / nb <= opts.tol {
            break;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for j in 0..m {
            let z = prec.apply(&v[j]);
            let mut w = a.matvec(&z);
            // modified Gram-Schmidt
            for i in 0..=j {
                let hij: f64 = w.iter().zip(&v[i]).map(|(p, q)| p * q).sum();
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm2(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let tmp = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = tmp;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k_used = j + 1;
            iters += 1;
            if g[j + 1].abs() / nb <= opts.tol || hn == 0.0 || iters >= opts.max_iters {
                break;
            }
            v.push(w.iter().map(|wk| wk / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in (i + 1)..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (u, vk) in update.iter_mut().zip(vi) {
                *u += yi * vk;
            }
        }
        for (xi, zi) in x.iter_mut().zip(prec.apply(&update)) {
            *xi += zi;
        }
    }
    let residual = relative_residual(a, &x, b);
    if !(residual <= opts.tol) {
        return Err(Error::Solver {
            message: format!("GMRES did not converge in {iters} iterations"),
            residual,
        });
    }
    Ok(SolveOutcome {
        x,
        residual,
        iterations: iters,
    })
}
