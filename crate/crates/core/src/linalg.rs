//! Compressed-row sparse matrices and the linear solvers used by the step
//! solves.

use faer::linalg::solvers::Solve;
use std::cell::RefCell;

use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat, Triplet};
use faer::{Col, Side};

use crate::error::{Error, Result};

/// Square sparse matrix in CSR layout with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given (unsorted, possibly repeated) row patterns.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    /// Same pattern, all values zero.
    pub fn zeros_like(&self) -> Self {
        Self { values: vec![0.0; self.values.len()], ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    fn index(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|p| lo + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.index(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Adds `v` at `(i, j)`; the entry must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self.index(i, j).expect("entry outside sparsity pattern");
        self.values[p] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `a·A + b·B` for two matrices sharing a pattern.
    pub fn combine(a: f64, ma: &CsrMatrix, b: f64, mb: &CsrMatrix) -> CsrMatrix {
        assert!(ma.row_ptr == mb.row_ptr && ma.col_idx == mb.col_idx, "patterns differ");
        let values = ma.values.iter().zip(&mb.values).map(|(x, y)| a * x + b * y).collect();
        CsrMatrix { values, ..ma.clone() }
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (i, &v) in d.iter().enumerate() {
            self.add(i, i, v);
        }
    }

    /// Sum of all entries.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(1.0))
        })
    }

    /// Appends the entries, offset by `(r0, c0)`, to a triplet list.
    pub fn push_triplets(&self, r0: usize, c0: usize, out: &mut Vec<Triplet<usize, usize, f64>>) {
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.push(Triplet::new(r0 + i, c0 + self.col_idx[p], self.values[p]));
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients. Returns `None` when the
/// iteration breaks down (indefinite matrix) or does not converge.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Option<Vec<f64>> {
    let n = a.dim();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Some(x);
    }
    let dinv: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { f64::NAN }).collect();
    if dinv.iter().any(|d| d.is_nan()) {
        return None;
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return None;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * bnorm {
            return Some(x);
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    None
}

fn faer_matrix(n: usize, triplets: &[Triplet<usize, usize, f64>]) -> Result<SparseColMat<usize, f64>> {
    SparseColMat::try_new_from_triplets(n, n, triplets).map_err(|e| Error::LinearSolver(format!("{e:?}")))
}

fn lu_solve(a: &SparseColMat<usize, f64>, lu: &Lu<usize, f64>, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = Col::<f64>::from_fn(b.len(), |i| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..b.len()).map(|i| x[i]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolver(format!("singular system of size {}", a.nrows())));
    }
    Ok(out)
}

/// Direct sparse LU solve.
pub fn solve_direct(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let mut t = Vec::with_capacity(a.nnz());
    a.push_triplets(0, 0, &mut t);
    let m = faer_matrix(a.dim(), &t)?;
    let lu = m.sp_lu().map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
    lu_solve(&m, &lu, b)
}

/// CG first, sparse LU if CG fails.
pub fn solve(a: &CsrMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let max_iter = (4 * a.dim()).max(200);
    match conjugate_gradient(a, b, rel_tol, max_iter) {
        Some(x) => Ok(x),
        None => solve_direct(a, b),
    }
}

/// Sparse LU for a sequence of matrices sharing one pattern; the symbolic
/// analysis is computed once.
pub struct PatternLu {
    n: usize,
    symbolic: Option<SymbolicLu<usize>>,
}

impl PatternLu {
    pub fn new(n: usize) -> Self {
        Self { n, symbolic: None }
    }

    pub fn solve(&mut self, triplets: &[Triplet<usize, usize, f64>], b: &[f64]) -> Result<Vec<f64>> {
        let m = faer_matrix(self.n, triplets)?;
        if self.symbolic.is_none() {
            let s = SymbolicLu::try_new(m.symbolic()).map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
            self.symbolic = Some(s);
        }
        let sym = self.symbolic.clone().expect("symbolic factorization present");
        let lu = Lu::try_new_with_symbolic(sym, m.as_ref()).map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
        lu_solve(&m, &lu, b)
    }
}

/// Sparse Cholesky for symmetric positive definite matrices that share one
/// pattern across calls. The symbolic factorization is kept until the
/// pattern changes. Matrices that are not positive definite go to [`solve`].
#[derive(Default)]
pub struct SpdSolver {
    cache: RefCell<Option<(Vec<usize>, Vec<usize>, SymbolicLlt<usize>)>>,
}

impl std::fmt::Debug for SpdSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdSolver").field("analysed", &self.cache.borrow().is_some()).finish()
    }
}

impl SpdSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&self, a: &CsrMatrix, b: &[f64], fallback_tol: f64) -> Result<Vec<f64>> {
        match self.cholesky(a, b) {
            Some(x) => Ok(x),
            None => solve(a, b, fallback_tol),
        }
    }

    fn cholesky(&self, a: &CsrMatrix, b: &[f64]) -> Option<Vec<f64>> {
        // a symmetric CSR matrix is its own CSC transpose
        let sym = SymbolicSparseColMat::new_checked(a.n, a.n, a.row_ptr.clone(), None, a.col_idx.clone());
        let mut cache = self.cache.borrow_mut();
        let fresh = !matches!(&*cache, Some((rp, ci, _)) if *rp == a.row_ptr && *ci == a.col_idx);
        if fresh {
            let s = SymbolicLlt::try_new(sym.as_ref(), Side::Lower).ok()?;
            *cache = Some((a.row_ptr.clone(), a.col_idx.clone(), s));
        }
        let s = cache.as_ref().expect("symbolic factorization present").2.clone();
        let m = SparseColMat::new(sym, a.values.clone());
        let llt = Llt::try_new_with_symbolic(s, m.as_ref(), Side::Lower).ok()?;
        let rhs = Col::from_fn(b.len(), |i| b[i]);
        let x = llt.solve(&rhs);
        let out: Vec<f64> = (0..b.len()).map(|i| x[i]).collect();
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}
