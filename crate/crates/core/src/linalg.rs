//! Sparse kernels and a conjugate-gradient solver.
//!
//! The normal-equation operators of the distributed solvers, such as
//! `JᵀJ + ρI` and `H + μAᵀA`, are only ever applied as a chain of sparse
//! matrix-vector products. Nothing here forms a matrix-matrix product.

use std::ops::AddAssign;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("conjugate gradient breakdown at iteration {iteration}: pᵀMp = {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Compressed sparse row matrix with sorted, duplicate-free columns per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy + Default + AddAssign> Csr<T> {
    /// Duplicate `(row, col)` entries are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Self {
        let mut entries: Vec<(usize, usize, T)> = triplets.into_iter().collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(entries.len());
        let mut values: Vec<T> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Stored entry, or `None` outside the sparsity pattern.
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| self.values[span.start + k])
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::default(); self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

impl Csr<f64> {
    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `y += Aᵀ x`
    pub fn mul_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.mul_transpose_add(x, &mut y);
        y
    }

    /// Squared column norms, i.e. the diagonal of `AᵀA`.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            out[*c] += v * v;
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Symmetric linear map given only by its action.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y = M x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Diagonal of `M`, if cheaply available. Used by the Jacobi option.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

impl LinearOperator for Csr<f64> {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y);
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some((0..self.nrows).map(|i| self.get(i, i).unwrap_or(0.0)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CgOptions {
    pub rel_tol: f64,
    /// `None` means twice the system dimension.
    pub max_iter: Option<usize>,
    pub jacobi: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            rel_tol: 1e-10,
            max_iter: None,
            jacobi: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖M x − rhs‖₂` at exit.
    pub residual_norm: f64,
    pub converged: bool,
}

/// Approximate inverse `z = P⁻¹ r` used to precondition CG.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Inverse of the operator diagonal; non-positive entries are left unscaled.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diagonal: &[f64]) -> Self {
        Jacobi {
            inv_diag: diagonal.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut()
            .zip(r.iter().zip(&self.inv_diag))
            .for_each(|(zi, (ri, wi))| *zi = ri * wi);
    }
}

struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Conjugate gradient for `M x = rhs` with `M` symmetric positive definite.
///
/// Stops once `‖M x − rhs‖₂ ≤ rel_tol·‖rhs‖₂`. Hitting the iteration cap is
/// reported through `converged = false`, not as an error. With
/// `opts.jacobi` the operator diagonal, when it has one, preconditions.
pub fn cg_solve(
    op: &dyn LinearOperator,
    rhs: &[f64],
    x0: &[f64],
    opts: &CgOptions,
) -> Result<CgOutcome, LinalgError> {
    match op.diagonal().filter(|_| opts.jacobi) {
        Some(d) => pcg_solve(op, &Jacobi::new(&d), rhs, x0, opts),
        None => pcg_solve(op, &Identity, rhs, x0, opts),
    }
}

/// [`cg_solve`] with an explicit preconditioner; `opts.jacobi` is ignored.
pub fn pcg_solve(
    op: &dyn LinearOperator,
    pre: &dyn Preconditioner,
    rhs: &[f64],
    x0: &[f64],
    opts: &CgOptions,
) -> Result<CgOutcome, LinalgError> {
    let n = op.dim();
    for len in [rhs.len(), x0.len()] {
        if len != n {
            return Err(LinalgError::DimensionMismatch { expected: n, got: len });
        }
    }
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
        });
    }
    let target = opts.rel_tol * rhs_norm;
    let max_iter = opts.max_iter.unwrap_or(2 * n);

    let mut x = x0.to_vec();
    let mut mp = vec![0.0; n];
    op.apply(&x, &mut mp);
    let mut r: Vec<f64> = rhs.iter().zip(&mp).map(|(b, m)| b - m).collect();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut r_norm = norm2(&r);
    let mut iterations = 0;

    while r_norm > target && iterations < max_iter {
        op.apply(&p, &mut mp);
        let curvature = dot(&p, &mp);
        if !(curvature > 0.0) {
            return Err(LinalgError::Breakdown {
                iteration: iterations,
                curvature,
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * mp[i];
        }
        iterations += 1;
        r_norm = norm2(&r);
        pre.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Ok(CgOutcome {
        x,
        iterations,
        residual_norm: r_norm,
        converged: r_norm <= target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Dense(DMatrix<f64>);

    impl LinearOperator for Dense {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            let v = &self.0 * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        }
        fn diagonal(&self) -> Option<Vec<f64>> {
            Some(self.0.diagonal().iter().copied().collect())
        }
    }

    struct Identity(usize);

    impl LinearOperator for Identity {
        fn dim(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            y.copy_from_slice(x);
        }
    }

    /// SPD matrix with eigenvalues spread over [1, kappa].
    fn random_spd(n: usize, kappa: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = g.qr().q();
        let eig = DVector::from_fn(n, |i, _| kappa.powf(i as f64 / (n - 1) as f64));
        &q * DMatrix::from_diagonal(&eig) * q.transpose()
    }

    /// Eigenvalues drawn uniformly from `[1, κ]`, with both ends present.
    fn random_spd_uniform(n: usize, kappa: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = g.qr().q();
        let eig = DVector::from_fn(n, |i, _| match i {
            0 => 1.0,
            1 => kappa,
            _ => rng.gen_range(1.0..kappa),
        });
        &q * DMatrix::from_diagonal(&eig) * q.transpose()
    }

    #[test]
    fn identity_one_iteration() {
        let b = vec![1.0, -2.0, 3.5];
        let out = cg_solve(&Identity(3), &b, &[0.0; 3], &CgOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn zero_rhs() {
        let out = cg_solve(&Identity(4), &[0.0; 4], &[1.0; 4], &CgOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![0.0; 4]);
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_spd(20, 1e3, &mut rng);
        let b: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let direct = m.clone().cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
        let out = cg_solve(&Dense(m), &b, &[0.0; 20], &CgOptions::default()).unwrap();
        assert!(out.converged);
        for (a, e) in out.x.iter().zip(direct.iter()) {
            assert!((a - e).abs() <= 1e-8 * (1.0 + e.abs()), "{a} vs {e}");
        }
    }

    #[test]
    fn reaches_tolerance_within_n_plus_five() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [5, 12, 30, 100] {
            let m = random_spd_uniform(n, 1e4, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let out = cg_solve(&Dense(m), &b, &vec![0.0; n], &CgOptions::default()).unwrap();
            assert!(out.converged && out.iterations <= n + 5, "n={n} took {}", out.iterations);
        }
    }

    #[test]
    fn jacobi_option_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_spd(15, 1e3, &mut rng);
        let scale = DMatrix::from_diagonal(&DVector::from_fn(15, |i, _| 10f64.powi(i as i32 % 4)));
        let m = &scale * m * &scale;
        let b: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let opts = CgOptions {
            jacobi: true,
            max_iter: Some(200),
            ..CgOptions::default()
        };
        let out = cg_solve(&Dense(m.clone()), &b, &[0.0; 15], &opts).unwrap();
        assert!(out.converged);
        let check = m * DVector::from_vec(out.x);
        for (c, e) in check.iter().zip(&b) {
            assert!((c - e).abs() < 1e-8);
        }
    }

    #[test]
    fn indefinite_operator_breaks_down() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let err = cg_solve(&Dense(m), &[1.0, 1.0], &[0.0, 0.0], &CgOptions::default()).unwrap_err();
        assert!(matches!(err, LinalgError::Breakdown { .. }));
    }

    #[test]
    fn csr_products() {
        let a = Csr::from_triplets(2, 3, [(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (0, 2, 1.0)]);
        assert_eq!(a.get(0, 2), Some(3.0));
        assert_eq!(a.get(1, 0), None);
        assert_eq!(a.apply(&[1.0, 1.0, 1.0]), vec![4.0, 3.0]);
        assert_eq!(a.apply_transpose(&[1.0, 2.0]), vec![1.0, 6.0, 3.0]);
        assert_eq!(a.column_sq_norms(), vec![1.0, 9.0, 9.0]);
    }

    proptest::proptest! {
        #[test]
        fn rhs_scaling(seed in 0u64..1000, alpha in -50.0f64..50.0) {
            proptest::prop_assume!(alpha.abs() > 1e-3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_spd(8, 1e2, &mut rng);
            let b: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let scaled: Vec<f64> = b.iter().map(|v| alpha * v).collect();
            let op = Dense(m);
            let x = cg_solve(&op, &b, &[0.0; 8], &CgOptions::default()).unwrap().x;
            let xs = cg_solve(&op, &scaled, &[0.0; 8], &CgOptions::default()).unwrap().x;
            let scale = norm_inf(&xs).max(1e-300);
            for (a, e) in xs.iter().zip(&x) {
                proptest::prop_assert!((a - alpha * e).abs() <= 1e-10 * scale.max(1.0) * 10.0);
            }
        }
    }
}
