//! Operator-valued RKHS estimator with a Gaussian scalar-times-identity kernel.
//!
//! With `A` the covariate Gram matrix, `K` the grid Gram matrix and `Y` the
//! `n x T` response table, the fitted coefficients `B` minimise
//!
//! ```text
//! standard:  Tr((Y - ABK)(Y - ABK)^T) + lambda Tr(A B K B^T)
//! modified:  Tr((Y - ABK)(Y - ABK)^T) + lambda Tr(D B K B^T),   D = diag(A)
//! ```
//!
//! Vectors are column-stacked, so `vec(ABK) = (K (x) A) vec(B)` for symmetric `K`.
//! The stationarity systems are
//!
//! ```text
//! standard:  [K (x) A + lambda I] vec(B) = vec(Y)
//! modified:  [K (x) A^T A + lambda (I (x) D)] vec(B) = vec(A^T Y)
//! ```
//!
//! Both are solved either densely ([`Solver::Dense`]) or through the
//! eigendecompositions of `A` and `K` ([`Solver::Spectral`]). The spectral
//! route relies on `D = I`, which holds for every Gaussian covariate Gram.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::curve::{sq_distance_slices, Curve, CurveSet, Grid};
use crate::error::{Error, Result};
use crate::kernel::{self, GramPair, ScalarKernel};

/// Which penalty the estimator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyVariant {
    /// `lambda * sum_ij a_ij <alpha_i, alpha_j>_H`
    Standard,
    /// `lambda * sum_i a_ii <alpha_i, alpha_i>_H`
    Modified,
}

impl PenaltyVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyVariant::Standard => "standard",
            PenaltyVariant::Modified => "modified",
        }
    }
}

impl core::str::FromStr for PenaltyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(PenaltyVariant::Standard),
            "modified" => Ok(PenaltyVariant::Modified),
            other => Err(Error::invalid(format!("unknown penalty variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// One Cholesky factorisation of the `nT x nT` system.
    Dense,
    /// Per-factor eigendecompositions; `O(n^3 + T^3)` setup, `O(nT(n + T))` per lambda.
    Spectral,
}

/// Hyper-parameters of one fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkhsParams {
    pub sigma: f64,
    pub sigma_prime: f64,
    pub lambda: f64,
    pub variant: PenaltyVariant,
}

impl RkhsParams {
    /// Bandwidths from the mean-distance heuristics.
    pub fn heuristic(xs: &CurveSet, lambda: f64, variant: PenaltyVariant) -> Result<Self> {
        Ok(RkhsParams {
            sigma: kernel::default_sigma(xs)?,
            sigma_prime: kernel::default_sigma_prime(xs.grid()),
            lambda,
            variant,
        })
    }

    fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        ScalarKernel::new(self.sigma)?;
        ScalarKernel::new(self.sigma_prime)?;
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("lambda must be positive"))
    }
}

fn check_response(gram: &GramPair, y: &DMatrix<f64>) -> Result<()> {
    if y.nrows() != gram.n() || y.ncols() != gram.t() {
        return Err(Error::invalid(format!(
            "response table is {}x{}, Gram matrices expect {}x{}",
            y.nrows(),
            y.ncols(),
            gram.n(),
            gram.t()
        )));
    }
    Ok(())
}

fn has_unit_diagonal(a: &DMatrix<f64>) -> bool {
    a.diagonal().iter().all(|&d| d == 1.0)
}

/// The system matrix and right-hand side of the stationarity equations.
pub fn normal_system(
    gram: &GramPair,
    y: &DMatrix<f64>,
    lambda: f64,
    variant: PenaltyVariant,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_response(gram, y)?;
    let (a, k) = (gram.a(), gram.k());
    let nt = gram.n() * gram.t();
    match variant {
        PenaltyVariant::Standard => {
            let mut sys = k.kronecker(a);
            for d in 0..nt {
                sys[(d, d)] += lambda;
            }
            Ok((sys, DVector::from_column_slice(y.as_slice())))
        }
        PenaltyVariant::Modified => {
            let ata = a.transpose() * a;
            let mut sys = k.kronecker(&ata);
            let n = gram.n();
            for d in 0..nt {
                sys[(d, d)] += lambda * a[(d % n, d % n)];
            }
            let rhs = a.transpose() * y;
            Ok((sys, DVector::from_column_slice(rhs.as_slice())))
        }
    }
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let ev = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = ev.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Coefficients via a dense Cholesky solve of the `nT x nT` system.
pub fn solve_dense(
    gram: &GramPair,
    y: &DMatrix<f64>,
    lambda: f64,
    variant: PenaltyVariant,
) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    let (sys, rhs) = normal_system(gram, y, lambda, variant)?;
    let Some(chol) = Cholesky::new(sys.clone()) else {
        return Err(Error::Singular {
            condition: condition_estimate(&sys),
            hint: "",
        });
    };
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular {
            condition: condition_estimate(&sys),
            hint: "",
        });
    }
    Ok(DMatrix::from_column_slice(
        gram.n(),
        gram.t(),
        sol.as_slice(),
    ))
}

/// Eigendecompositions of the two Gram factors, reusable across lambdas.
#[derive(Debug, Clone)]
pub struct SpectralGram {
    a_vals: DVector<f64>,
    a_vecs: DMatrix<f64>,
    k_vals: DVector<f64>,
    k_vecs: DMatrix<f64>,
}

impl SpectralGram {
    pub fn new(gram: &GramPair) -> Result<Self> {
        if !has_unit_diagonal(gram.a()) {
            return Err(Error::invalid(
                "spectral solver requires a unit-diagonal covariate Gram",
            ));
        }
        let ea = SymmetricEigen::new(gram.a().clone());
        let ek = SymmetricEigen::new(gram.k().clone());
        Ok(SpectralGram {
            a_vals: ea.eigenvalues,
            a_vecs: ea.eigenvectors,
            k_vals: ek.eigenvalues,
            k_vecs: ek.eigenvectors,
        })
    }

    pub fn n(&self) -> usize {
        self.a_vals.len()
    }

    pub fn t(&self) -> usize {
        self.k_vals.len()
    }

    fn rotate(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.a_vecs.transpose() * y * &self.k_vecs
    }

    fn unrotate(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a_vecs * m * self.k_vecs.transpose()
    }

    /// Eigenvalue of `K (x) A` (or `K (x) A^T A`) and the matching numerator factor.
    fn pair(&self, i: usize, j: usize, variant: PenaltyVariant) -> (f64, f64) {
        let (a, k) = (self.a_vals[i], self.k_vals[j]);
        match variant {
            PenaltyVariant::Standard => (a * k, 1.0),
            PenaltyVariant::Modified => (a * a * k, a),
        }
    }

    fn check(&self, y: &DMatrix<f64>, lambda: f64) -> Result<()> {
        check_lambda(lambda)?;
        if y.nrows() != self.n() || y.ncols() != self.t() {
            return Err(Error::invalid(
                "response table does not match the Gram factors",
            ));
        }
        Ok(())
    }

    pub fn solve(
        &self,
        y: &DMatrix<f64>,
        lambda: f64,
        variant: PenaltyVariant,
    ) -> Result<DMatrix<f64>> {
        self.check(y, lambda)?;
        let mut rot = self.rotate(y);
        for j in 0..self.t() {
            for i in 0..self.n() {
                let (mu, num) = self.pair(i, j, variant);
                let den = mu + lambda;
                if !(den > 0.0) {
                    return Err(Error::Singular {
                        condition: f64::INFINITY,
                        hint: "",
                    });
                }
                rot[(i, j)] *= num / den;
            }
        }
        Ok(self.unrotate(&rot))
    }

    /// Fitted values `ABK` without forming `B`.
    pub fn fitted(
        &self,
        y: &DMatrix<f64>,
        lambda: f64,
        variant: PenaltyVariant,
    ) -> Result<DMatrix<f64>> {
        self.check(y, lambda)?;
        let mut rot = self.rotate(y);
        for j in 0..self.t() {
            for i in 0..self.n() {
                rot[(i, j)] *= self.shrink(i, j, lambda, variant);
            }
        }
        Ok(self.unrotate(&rot))
    }

    /// Eigenvalue of the influence matrix on the (i, j) eigenpair.
    fn shrink(&self, i: usize, j: usize, lambda: f64, variant: PenaltyVariant) -> f64 {
        let (mu, _) = self.pair(i, j, variant);
        mu / (mu + lambda)
    }

    /// `Tr(I - A(lambda))`, accumulated as `sum lambda / (mu + lambda)`.
    pub fn residual_trace(&self, lambda: f64, variant: PenaltyVariant) -> f64 {
        let mut tr = 0.0;
        for j in 0..self.t() {
            for i in 0..self.n() {
                let (mu, _) = self.pair(i, j, variant);
                tr += lambda / (mu + lambda);
            }
        }
        tr
    }

    /// GCV score with an explicit normalising count.
    pub fn gcv_with_count(
        &self,
        y: &DMatrix<f64>,
        lambda: f64,
        variant: PenaltyVariant,
        count: f64,
    ) -> Result<f64> {
        let fitted = self.fitted(y, lambda, variant)?;
        let rss = (y - fitted).norm_squared();
        gcv_ratio(rss, self.residual_trace(lambda, variant), count)
    }

    /// GCV score normalised by `N = nT`.
    pub fn gcv(&self, y: &DMatrix<f64>, lambda: f64, variant: PenaltyVariant) -> Result<f64> {
        self.gcv_with_count(y, lambda, variant, (self.n() * self.t()) as f64)
    }
}

fn gcv_ratio(rss: f64, residual_trace: f64, count: f64) -> Result<f64> {
    if !(residual_trace > 1e-10 * count) {
        return Err(Error::DegenerateGcv(residual_trace));
    }
    let denom = residual_trace / count;
    Ok((rss / count) / (denom * denom))
}

/// Fitted RKHS estimator.
#[derive(Debug, Clone)]
pub struct RkhsModel {
    train_x: CurveSet,
    coefficients: DMatrix<f64>,
    params: RkhsParams,
    // alpha_i evaluated on the grid: row i is sum_l b^i_l k(t_l, .)
    alpha_on_grid: DMatrix<f64>,
    covariate_kernel: ScalarKernel,
}

impl RkhsModel {
    /// Assembles a model from stored parts, e.g. after loading from disk.
    pub fn from_parts(
        train_x: CurveSet,
        coefficients: DMatrix<f64>,
        params: RkhsParams,
    ) -> Result<Self> {
        params.validate()?;
        if coefficients.nrows() != train_x.len() || coefficients.ncols() != train_x.grid().len() {
            return Err(Error::invalid(format!(
                "coefficient matrix is {}x{}, expected {}x{}",
                coefficients.nrows(),
                coefficients.ncols(),
                train_x.len(),
                train_x.grid().len()
            )));
        }
        if let Some(i) = coefficients.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let k = kernel::grid_gram(train_x.grid(), &ScalarKernel::new(params.sigma_prime)?);
        let alpha_on_grid = &coefficients * &k;
        Ok(RkhsModel {
            train_x,
            coefficients,
            params,
            alpha_on_grid,
            covariate_kernel: ScalarKernel::new(params.sigma)?,
        })
    }

    pub fn train_x(&self) -> &CurveSet {
        &self.train_x
    }

    pub fn grid(&self) -> &Grid {
        self.train_x.grid()
    }

    /// The `n x T` coefficient matrix `B`.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn params(&self) -> &RkhsParams {
        &self.params
    }

    /// `y(t_m) = sum_i a(||x_i - x||) sum_l b^i_l k(t_l, t_m)`.
    pub fn predict(&self, x_new: &Curve) -> Result<Curve> {
        if !x_new.grid().same_as(self.grid()) {
            return Err(Error::GridMismatch);
        }
        let pts = self.grid().points();
        let t = self.grid().len();
        let mut out = alloc::vec![0.0; t];
        for (i, xi) in self.train_x.rows().enumerate() {
            let w = self
                .covariate_kernel
                .eval_sq(sq_distance_slices(xi, x_new.values(), pts));
            for (o, alpha) in out.iter_mut().zip(self.alpha_on_grid.row(i).iter()) {
                *o += w * alpha;
            }
        }
        Curve::new(self.grid().clone(), out)
    }

    pub fn predict_set(&self, xs: &CurveSet) -> Result<CurveSet> {
        if !xs.grid().same_as(self.grid()) {
            return Err(Error::GridMismatch);
        }
        let curves = (0..xs.len())
            .map(|i| self.predict(&xs.curve(i)))
            .collect::<Result<Vec<_>>>()?;
        CurveSet::from_curves(&curves)
    }

    /// Matrix-path fitted values `Y_hat = A B K`.
    pub fn fitted_values(&self) -> Result<DMatrix<f64>> {
        let gram = GramPair::build(&self.train_x, self.params.sigma, self.params.sigma_prime)?;
        Ok(gram.a() * &self.coefficients * gram.k())
    }
}

/// Fits with the spectral solver.
pub fn fit(xs: &CurveSet, ys: &CurveSet, params: &RkhsParams) -> Result<RkhsModel> {
    fit_with(xs, ys, params, Solver::Spectral)
}

pub fn fit_with(
    xs: &CurveSet,
    ys: &CurveSet,
    params: &RkhsParams,
    solver: Solver,
) -> Result<RkhsModel> {
    xs.check_compatible(ys)?;
    params.validate()?;
    let gram = GramPair::build(xs, params.sigma, params.sigma_prime)?;
    let y = ys.to_matrix();
    let b = match solver {
        Solver::Dense => solve_dense(&gram, &y, params.lambda, params.variant)?,
        Solver::Spectral => SpectralGram::new(&gram)?.solve(&y, params.lambda, params.variant)?,
    };
    RkhsModel::from_parts(xs.clone(), b, *params)
}

/// Penalty functional at `b` without the lambda factor.
pub fn penalty(gram: &GramPair, b: &DMatrix<f64>, variant: PenaltyVariant) -> Result<f64> {
    check_response(gram, b)?;
    let bk = b * gram.k();
    let left = match variant {
        PenaltyVariant::Standard => gram.a() * b,
        PenaltyVariant::Modified => DMatrix::from_diagonal(&gram.a().diagonal()) * b,
    };
    // Tr(L K B^T) = sum_ij (L)_ij (B K)_ij for symmetric K
    Ok(left.component_mul(&bk).sum())
}

/// Matrix-form objective evaluated at a candidate coefficient matrix.
pub fn objective(
    gram: &GramPair,
    y: &DMatrix<f64>,
    b: &DMatrix<f64>,
    lambda: f64,
    variant: PenaltyVariant,
) -> Result<f64> {
    check_response(gram, y)?;
    check_response(gram, b)?;
    let resid = y - gram.a() * b * gram.k();
    Ok(resid.norm_squared() + lambda * penalty(gram, b, variant)?)
}

/// Dense influence matrix `A(lambda) = (K (x) A)[K (x) A + lambda I]^-1` (standard variant).
pub fn influence_matrix(gram: &GramPair, lambda: f64) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    let m = gram.k().kronecker(gram.a());
    let mut sys = m.clone();
    for d in 0..sys.nrows() {
        sys[(d, d)] += lambda;
    }
    let Some(chol) = Cholesky::new(sys.clone()) else {
        return Err(Error::Singular {
            condition: condition_estimate(&sys),
            hint: "",
        });
    };
    // S and M commute, so M S^-1 = S^-1 M
    Ok(chol.solve(&m))
}

/// GCV score through the dense influence matrix, normalised by `N = nT`.
pub fn gcv_score_dense(gram: &GramPair, y: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    check_response(gram, y)?;
    let infl = influence_matrix(gram, lambda)?;
    let yv = DVector::from_column_slice(y.as_slice());
    let resid = &yv - &infl * &yv;
    let count = yv.len() as f64;
    gcv_ratio(resid.norm_squared(), count - infl.trace(), count)
}

/// `V(lambda)` for the curve data, standard penalty, `N = nT`.
pub fn gcv_score(
    xs: &CurveSet,
    ys: &CurveSet,
    sigma: f64,
    sigma_prime: f64,
    lambda: f64,
) -> Result<f64> {
    gcv_score_variant(xs, ys, sigma, sigma_prime, lambda, PenaltyVariant::Standard)
}

pub fn gcv_score_variant(
    xs: &CurveSet,
    ys: &CurveSet,
    sigma: f64,
    sigma_prime: f64,
    lambda: f64,
    variant: PenaltyVariant,
) -> Result<f64> {
    xs.check_compatible(ys)?;
    let spec = SpectralGram::new(&GramPair::build(xs, sigma, sigma_prime)?)?;
    spec.gcv(&ys.to_matrix(), lambda, variant)
}

/// GCV scores over a lambda grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GcvCurve {
    pub lambdas: Vec<f64>,
    pub scores: Vec<f64>,
    pub argmin_index: usize,
}

impl GcvCurve {
    pub fn selected_lambda(&self) -> f64 {
        self.lambdas[self.argmin_index]
    }
}

/// Index of the first minimum; `None` if every score is infinite or NaN.
pub fn first_argmin(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        match best {
            Some(b) if scores[b] <= s => {}
            _ => best = Some(i),
        }
    }
    best
}

pub(crate) fn validate_positive_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{what} grid is empty")));
    }
    if grid.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("{what} grid must be positive")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!(
            "{what} grid must be strictly increasing"
        )));
    }
    Ok(())
}

/// Evaluates an arbitrary per-lambda score, failed points become `+inf`.
pub(crate) fn scan_grid(
    lambdas: &[f64],
    mut score: impl FnMut(f64) -> Result<f64>,
) -> Result<GcvCurve> {
    let mut last_err = None;
    let scores: Vec<f64> = lambdas
        .iter()
        .map(|&l| match score(l) {
            Ok(v) => v,
            Err(e) => {
                last_err = Some(e);
                f64::INFINITY
            }
        })
        .collect();
    match first_argmin(&scores) {
        Some(argmin_index) => Ok(GcvCurve {
            lambdas: lambdas.to_vec(),
            scores,
            argmin_index,
        }),
        None => Err(Error::AllCandidatesFailed(
            last_err.map(|e| e.to_string()).unwrap_or_default(),
        )),
    }
}

/// Scores every lambda and picks the first minimiser.
pub fn gcv_select(
    xs: &CurveSet,
    ys: &CurveSet,
    sigma: f64,
    sigma_prime: f64,
    lambda_grid: &[f64],
    variant: PenaltyVariant,
) -> Result<GcvCurve> {
    validate_positive_grid(lambda_grid, "lambda")?;
    xs.check_compatible(ys)?;
    let spec = SpectralGram::new(&GramPair::build(xs, sigma, sigma_prime)?)?;
    let y = ys.to_matrix();
    scan_grid(lambda_grid, |l| spec.gcv(&y, l, variant))
}

/// Validation MSE of the fit at each lambda (mean over curves and grid points).
///
/// Returned in a [`GcvCurve`] whose scores are validation errors rather than GCV values.
#[allow(clippy::too_many_arguments)]
pub fn validation_scan(
    xs: &CurveSet,
    ys: &CurveSet,
    valid_x: &CurveSet,
    valid_y: &CurveSet,
    sigma: f64,
    sigma_prime: f64,
    lambda_grid: &[f64],
    variant: PenaltyVariant,
) -> Result<GcvCurve> {
    validate_positive_grid(lambda_grid, "lambda")?;
    xs.check_compatible(ys)?;
    valid_x.check_compatible(valid_y)?;
    if !valid_x.grid().same_as(xs.grid()) {
        return Err(Error::GridMismatch);
    }
    let gram = GramPair::build(xs, sigma, sigma_prime)?;
    let spec = SpectralGram::new(&gram)?;
    let y = ys.to_matrix();
    let a_valid = cross_gram(valid_x, xs, sigma)?;
    let target = valid_y.to_matrix();
    scan_grid(lambda_grid, |l| {
        let b = spec.solve(&y, l, variant)?;
        let pred = &a_valid * b * gram.k();
        Ok((pred - &target).norm_squared() / target.len() as f64)
    })
}

/// `a(||x_r - x_c||)` between two curve sets.
pub fn cross_gram(rows: &CurveSet, cols: &CurveSet, sigma: f64) -> Result<DMatrix<f64>> {
    let kern = ScalarKernel::new(sigma)?;
    Ok(kernel::cross_sq_distances(rows, cols)?.map(|d2| kern.eval_sq(d2)))
}

/// `count` logarithmically spaced values from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || !(min > 0.0) || !(max >= min) || !max.is_finite() {
        return Err(Error::invalid("empty lambda range"));
    }
    if count == 1 {
        return Ok(alloc::vec![min]);
    }
    let (lo, hi) = (libm::log10(min), libm::log10(max));
    let step = (hi - lo) / (count - 1) as f64;
    let mut out: Vec<f64> = (0..count)
        .map(|i| libm::pow(10.0, lo + step * i as f64))
        .collect();
    out[0] = min;
    out[count - 1] = max;
    if out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("empty lambda range"));
    }
    Ok(out)
}

/// 25 points from 1e-4 to 1e3.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-4, 1e3, 25).expect("static grid is valid")
}
