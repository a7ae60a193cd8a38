//! Penalised integral linear model `y(t) = alpha(t) + int beta(s, t) x(s) ds`.
//!
//! `alpha` is expanded in the basis along t and `beta` in the tensor basis,
//! `beta(s, t) = sum_pq c_pq B_p(s) B_q(t)`. Writing `Z_ip = int B_p(s) x_i(s) ds`
//! (trapezoid on the grid) and `W = [1 | Z]`, the fitted table is
//! `W Theta Phi^T` with `Theta = [alpha^T; C]` and `Phi_lq = B_q(t_l)`, so the
//! normal equations have Kronecker structure and never need the `nT`-row design.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::bspline::BsplineBasis;
use crate::curve::{Curve, CurveSet, Grid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    basis: BsplineBasis,
    grid: Grid,
    alpha_coeffs: Vec<f64>,
    beta_coeffs: DMatrix<f64>,
    penalty_lambda: f64,
}

fn trapezoid_weights(grid: &Grid) -> Vec<f64> {
    let h = grid.step();
    let t = grid.len();
    (0..t)
        .map(|l| if l == 0 || l == t - 1 { 0.5 * h } else { h })
        .collect()
}

/// `Z_ip`: trapezoid integrals of each basis function against each curve.
fn basis_projections(xs: &CurveSet, phi: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let m = phi.ncols();
    let mut z = DMatrix::zeros(xs.len(), m);
    for (i, x) in xs.rows().enumerate() {
        for p in 0..m {
            z[(i, p)] = x
                .iter()
                .zip(weights)
                .enumerate()
                .map(|(l, (v, w))| w * v * phi[(l, p)])
                .sum();
        }
    }
    z
}

fn with_intercept(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut w = DMatrix::from_element(z.nrows(), z.ncols() + 1, 1.0);
    w.columns_mut(1, z.ncols()).copy_from(z);
    w
}

impl LinearModel {
    pub fn from_parts(
        basis: BsplineBasis,
        grid: Grid,
        alpha_coeffs: Vec<f64>,
        beta_coeffs: DMatrix<f64>,
        penalty_lambda: f64,
    ) -> Result<Self> {
        let m = basis.count();
        if alpha_coeffs.len() != m || beta_coeffs.nrows() != m || beta_coeffs.ncols() != m {
            return Err(Error::invalid(
                "coefficient dimensions do not match the basis",
            ));
        }
        if !(penalty_lambda >= 0.0) {
            return Err(Error::invalid("penalty must be nonnegative"));
        }
        if alpha_coeffs
            .iter()
            .chain(beta_coeffs.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(LinearModel {
            basis,
            grid,
            alpha_coeffs,
            beta_coeffs,
            penalty_lambda,
        })
    }

    pub fn basis(&self) -> &BsplineBasis {
        &self.basis
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha_coeffs(&self) -> &[f64] {
        &self.alpha_coeffs
    }

    /// `c_pq` with `p` indexing `s` (rows) and `q` indexing `t` (columns).
    pub fn beta_coeffs(&self) -> &DMatrix<f64> {
        &self.beta_coeffs
    }

    pub fn penalty_lambda(&self) -> f64 {
        self.penalty_lambda
    }

    fn theta(&self) -> DMatrix<f64> {
        let m = self.basis.count();
        let mut theta = DMatrix::zeros(m + 1, m);
        for q in 0..m {
            theta[(0, q)] = self.alpha_coeffs[q];
        }
        theta.rows_mut(1, m).copy_from(&self.beta_coeffs);
        theta
    }

    /// Predictions as an `n x T` table.
    pub fn predict_matrix(&self, xs: &CurveSet) -> Result<DMatrix<f64>> {
        if !xs.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let phi = self.basis.design(self.grid.points())?;
        let z = basis_projections(xs, &phi, &trapezoid_weights(&self.grid));
        Ok(with_intercept(&z) * self.theta() * phi.transpose())
    }

    /// `y(t_l) = alpha(t_l) + trapezoid_s(beta(s, t_l) x(s))`.
    pub fn predict(&self, x_new: &Curve) -> Result<Curve> {
        if !x_new.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let pts = self.grid.points();
        let phi = self.basis.design(pts)?;
        let weights = trapezoid_weights(&self.grid);
        // beta on the grid: rows s, columns t
        let beta = &phi * &self.beta_coeffs * phi.transpose();
        let alpha = &phi * DVector::from_column_slice(&self.alpha_coeffs);
        let out = (0..pts.len())
            .map(|l| {
                let integral: f64 = (0..pts.len())
                    .map(|s| weights[s] * beta[(s, l)] * x_new.values()[s])
                    .sum();
                alpha[l] + integral
            })
            .collect();
        Curve::new(self.grid.clone(), out)
    }

    pub fn predict_set(&self, xs: &CurveSet) -> Result<CurveSet> {
        CurveSet::from_matrix(self.grid.clone(), &self.predict_matrix(xs)?)
    }

    /// Roughness `int int (beta_ss)^2 + (beta_tt)^2`.
    pub fn roughness(&self) -> f64 {
        let g0 = self.basis.derivative_gram(0);
        let r2 = self.basis.derivative_gram(2);
        let c = &self.beta_coeffs;
        (c.transpose() * &r2 * c * &g0).trace() + (c.transpose() * &g0 * c * &r2).trace()
    }

    /// Penalised least-squares objective on the given data.
    pub fn objective(&self, xs: &CurveSet, ys: &CurveSet) -> Result<f64> {
        xs.check_compatible(ys)?;
        let resid = ys.to_matrix() - self.predict_matrix(xs)?;
        Ok(resid.norm_squared() + self.penalty_lambda * self.roughness())
    }
}

/// Normal-equation pieces for one training set, reusable across penalties.
#[derive(Debug, Clone)]
pub struct LinearDesign {
    basis: BsplineBasis,
    grid: Grid,
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    penalty: DMatrix<f64>,
}

impl LinearDesign {
    pub fn new(xs: &CurveSet, ys: &CurveSet, basis: &BsplineBasis) -> Result<Self> {
        xs.check_compatible(ys)?;
        let grid = xs.grid().clone();
        let m = basis.count();
        let phi = basis.design(grid.points())?;
        let w = with_intercept(&basis_projections(xs, &phi, &trapezoid_weights(&grid)));
        let gram = (phi.transpose() * &phi).kronecker(&(w.transpose() * &w));
        let rhs_mat = w.transpose() * ys.to_matrix() * &phi;
        let rhs = DVector::from_column_slice(rhs_mat.as_slice());

        let g0 = basis.derivative_gram(0);
        let r2 = basis.derivative_gram(2);
        let dim = (m + 1) * m;
        let mut penalty = DMatrix::zeros(dim, dim);
        let idx = |p: usize, q: usize| q * (m + 1) + p + 1;
        for q in 0..m {
            for p in 0..m {
                for q2 in 0..m {
                    for p2 in 0..m {
                        penalty[(idx(p, q), idx(p2, q2))] =
                            r2[(p, p2)] * g0[(q, q2)] + g0[(p, p2)] * r2[(q, q2)];
                    }
                }
            }
        }
        Ok(LinearDesign {
            basis: basis.clone(),
            grid,
            gram,
            rhs,
            penalty,
        })
    }

    pub fn solve(&self, penalty_lambda: f64) -> Result<LinearModel> {
        if !(penalty_lambda >= 0.0) || !penalty_lambda.is_finite() {
            return Err(Error::invalid("penalty must be nonnegative"));
        }
        let m = self.basis.count();
        let sys = &self.gram + &self.penalty * penalty_lambda;
        let singular = || Error::Singular {
            condition: f64::INFINITY,
            hint: "; use a positive penalty",
        };
        let chol = Cholesky::new(sys).ok_or_else(singular)?;
        let sol = chol.solve(&self.rhs);
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(singular());
        }
        let theta = DMatrix::from_column_slice(m + 1, m, sol.as_slice());
        let alpha = theta.row(0).iter().copied().collect();
        let beta = theta.rows(1, m).into_owned();
        LinearModel::from_parts(
            self.basis.clone(),
            self.grid.clone(),
            alpha,
            beta,
            penalty_lambda,
        )
    }
}

pub fn linear_fit(
    xs: &CurveSet,
    ys: &CurveSet,
    basis: &BsplineBasis,
    penalty_lambda: f64,
) -> Result<LinearModel> {
    LinearDesign::new(xs, ys, basis)?.solve(penalty_lambda)
}
