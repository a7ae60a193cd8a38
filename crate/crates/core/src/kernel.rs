//! Gaussian kernels, Gram matrices, and bandwidth heuristics.
//!
//! The operator-valued kernel is `K(x, y) = a(||x - y||) I`; only the scalar
//! factor `a` is represented, the identity operator is implicit.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::curve::{sq_distance_slices, CurveSet, Grid};
use crate::error::{Error, Result};

/// Gaussian kernel `exp(-d^2 / (2 h^2))` with bandwidth `h > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarKernel {
    bandwidth: f64,
}

impl ScalarKernel {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(
                "kernel bandwidth must be positive and finite",
            ));
        }
        Ok(ScalarKernel { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn eval(&self, d: f64) -> f64 {
        self.eval_sq(d * d)
    }

    /// Same as [`eval`](Self::eval) but takes the squared distance.
    pub fn eval_sq(&self, d2: f64) -> f64 {
        libm::exp(-d2 / (2.0 * self.bandwidth * self.bandwidth))
    }
}

/// Scalar-times-identity kernel on curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorKernel {
    scalar: ScalarKernel,
}

impl OperatorKernel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Ok(OperatorKernel {
            scalar: ScalarKernel::new(sigma)?,
        })
    }

    pub fn scalar(&self) -> ScalarKernel {
        self.scalar
    }
}

/// Pairwise squared L2 distances between the curves of a set.
pub fn pairwise_sq_distances(xs: &CurveSet) -> DMatrix<f64> {
    let n = xs.len();
    let pts = xs.grid().points();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sq_distance_slices(xs.row(i), xs.row(j), pts);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Squared distances from each curve of `rows` to each curve of `cols`.
pub fn cross_sq_distances(rows: &CurveSet, cols: &CurveSet) -> Result<DMatrix<f64>> {
    if !rows.grid().same_as(cols.grid()) {
        return Err(Error::GridMismatch);
    }
    let pts = rows.grid().points();
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        sq_distance_slices(rows.row(i), cols.row(j), pts)
    }))
}

/// `A_ij = a(||x_i - x_j||)`.
pub fn covariate_gram(xs: &CurveSet, kern: &OperatorKernel) -> DMatrix<f64> {
    gram_from_sq_distances(&pairwise_sq_distances(xs), &kern.scalar)
}

pub(crate) fn gram_from_sq_distances(d2: &DMatrix<f64>, kern: &ScalarKernel) -> DMatrix<f64> {
    let n = d2.nrows();
    let mut a = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = kern.eval_sq(d2[(i, j)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// `K_lm = k(t_l, t_m)`.
pub fn grid_gram(grid: &Grid, kern: &ScalarKernel) -> DMatrix<f64> {
    let t = grid.points();
    let len = t.len();
    let mut k = DMatrix::identity(len, len);
    for l in 0..len {
        for m in (l + 1)..len {
            let v = kern.eval(t[l] - t[m]);
            k[(l, m)] = v;
            k[(m, l)] = v;
        }
    }
    k
}

/// Mean L2 distance over unordered pairs of distinct indices.
pub fn default_sigma(xs: &CurveSet) -> Result<f64> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::DegenerateBandwidth("fewer than two curves"));
    }
    let d2 = pairwise_sq_distances(xs);
    mean_pair_distance(&d2)
}

pub(crate) fn mean_pair_distance(d2: &DMatrix<f64>) -> Result<f64> {
    let n = d2.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += libm::sqrt(d2[(i, j)]);
        }
    }
    let mean = sum / (n * (n - 1) / 2) as f64;
    if mean > 0.0 {
        Ok(mean)
    } else {
        Err(Error::DegenerateBandwidth("all curves are identical"))
    }
}

/// Mean `|t_l - t_m|` over unordered pairs `l < m`.
pub fn default_sigma_prime(grid: &Grid) -> f64 {
    let t = grid.points();
    let mut sum = 0.0;
    for l in 0..t.len() {
        for m in (l + 1)..t.len() {
            sum += t[m] - t[l];
        }
    }
    sum / (t.len() * (t.len() - 1) / 2) as f64
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of a symmetric matrix. The caller interprets the sign.
pub fn check_positive_definite(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?.min())
}

/// All eigenvalues of a symmetric matrix (unordered).
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<nalgebra::DVector<f64>> {
    if !m.is_square() {
        return Err(Error::invalid("matrix must be square"));
    }
    let asym = max_asymmetry(m);
    if asym > 1e-10 {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(SymmetricEigen::new(m.clone()).eigenvalues)
}

/// Nonnegative definite up to the relative tolerance `-1e-10 * lambda_max`.
pub fn is_nonnegative_definite(m: &DMatrix<f64>) -> Result<bool> {
    let ev = symmetric_eigenvalues(m)?;
    let max = ev.max().max(0.0);
    Ok(ev.min() >= -1e-10 * max)
}

/// The covariate and grid Gram matrices used by the RKHS solver.
#[derive(Debug, Clone, PartialEq)]
pub struct GramPair {
    a: DMatrix<f64>,
    k: DMatrix<f64>,
}

impl GramPair {
    pub fn new(a: DMatrix<f64>, k: DMatrix<f64>) -> Result<Self> {
        for m in [&a, &k] {
            if !m.is_square() || m.nrows() == 0 {
                return Err(Error::invalid("Gram matrices must be square and non-empty"));
            }
            let asym = max_asymmetry(m);
            if asym > 1e-12 {
                return Err(Error::NotSymmetric(asym));
            }
        }
        Ok(GramPair { a, k })
    }

    pub fn build(xs: &CurveSet, sigma: f64, sigma_prime: f64) -> Result<Self> {
        let a = covariate_gram(xs, &OperatorKernel::gaussian(sigma)?);
        let k = grid_gram(xs.grid(), &ScalarKernel::new(sigma_prime)?);
        Ok(GramPair { a, k })
    }

    /// Covariate Gram `A` (`n x n`).
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Grid Gram `K` (`T x T`).
    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn t(&self) -> usize {
        self.k.nrows()
    }
}
