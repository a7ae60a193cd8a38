//! Sampled curves on a shared equispaced grid over [0, 1].
//!
//! Every curve in the toolkit is a vector of function values at the points
//! of a [`Grid`]. Integrals over [0, 1] use the composite trapezoid rule on
//! that grid, so `l2_norm_sq` and `l2_distance` are quadrature approximations
//! of the continuous L2 quantities.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SPACING_TOL: f64 = 1e-12;

/// Strictly increasing equispaced sampling locations with endpoints 0 and 1.
#[derive(Debug, Clone)]
pub struct Grid {
    points: Arc<[f64]>,
}

impl Grid {
    /// Validates an explicit list of points.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let t = points.len();
        if t < 2 {
            return Err(Error::InvalidGrid("at least two points are required"));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if points[0] != 0.0 || points[t - 1] != 1.0 {
            return Err(Error::InvalidGrid("first point must be 0 and last point 1"));
        }
        let step = 1.0 / (t - 1) as f64;
        for w in points.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidGrid("points must be strictly increasing"));
            }
            if ((w[1] - w[0]) - step).abs() >= SPACING_TOL {
                return Err(Error::InvalidGrid("points must be equispaced"));
            }
        }
        Ok(Grid {
            points: points.into(),
        })
    }

    /// `t_l = l / (T - 1)` for `l = 0..T`.
    pub fn uniform(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidGrid("at least two points are required"));
        }
        let denom = (len - 1) as f64;
        let points: Vec<f64> = (0..len).map(|l| l as f64 / denom).collect();
        Ok(Grid {
            points: points.into(),
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.len() - 1) as f64
    }

    /// Same grid: shared storage or identical points.
    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.points, &other.points) || self.points[..] == other.points[..]
    }

    /// Composite trapezoid rule for the function sampled by `values`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        trapezoid_integral(values, self)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

/// Composite trapezoid rule over the grid. Exact for affine functions of t.
pub fn trapezoid_integral(values: &[f64], grid: &Grid) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    Ok(trapezoid_unchecked(values, grid.points()))
}

pub(crate) fn trapezoid_unchecked(values: &[f64], points: &[f64]) -> f64 {
    let mut acc = 0.0;
    for l in 0..values.len() - 1 {
        acc += 0.5 * (points[l + 1] - points[l]) * (values[l] + values[l + 1]);
    }
    acc
}

/// One sampled function.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Curve { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        let values = alloc::vec![value; grid.len()];
        Curve::new(grid, values)
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Curve::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Trapezoid approximation of the integral of `c(t)^2` over [0, 1].
pub fn l2_norm_sq(c: &Curve) -> f64 {
    let sq: Vec<f64> = c.values.iter().map(|v| v * v).collect();
    trapezoid_unchecked(&sq, c.grid.points())
}

pub fn l2_distance(c1: &Curve, c2: &Curve) -> Result<f64> {
    if !c1.grid.same_as(&c2.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(libm::sqrt(sq_distance_slices(
        &c1.values,
        &c2.values,
        c1.grid.points(),
    )))
}

pub(crate) fn sq_distance_slices(a: &[f64], b: &[f64], points: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut prev = {
        let d = a[0] - b[0];
        d * d
    };
    for l in 1..a.len() {
        let d = a[l] - b[l];
        let cur = d * d;
        acc += 0.5 * (points[l] - points[l - 1]) * (prev + cur);
        prev = cur;
    }
    acc
}

/// `n` curves sampled on one grid, stored row-major as an `n x T` table.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    grid: Grid,
    n: usize,
    data: Vec<f64>,
}

impl CurveSet {
    /// Builds from row-major values (`rows * grid.len()` entries).
    pub fn from_rows(grid: Grid, data: Vec<f64>) -> Result<Self> {
        let t = grid.len();
        if data.is_empty() {
            return Err(Error::EmptyCurveSet);
        }
        if !data.len().is_multiple_of(t) {
            return Err(Error::LengthMismatch {
                expected: t * (data.len() / t + 1),
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(CurveSet {
            n: data.len() / t,
            grid,
            data,
        })
    }

    pub fn from_curves(curves: &[Curve]) -> Result<Self> {
        let first = curves.first().ok_or(Error::EmptyCurveSet)?;
        let grid = first.grid.clone();
        let mut data = Vec::with_capacity(curves.len() * grid.len());
        for c in curves {
            if !c.grid.same_as(&grid) {
                return Err(Error::GridMismatch);
            }
            data.extend_from_slice(&c.values);
        }
        Ok(CurveSet {
            n: curves.len(),
            grid,
            data,
        })
    }

    /// Rows of `m` become curves; `m` must be `n x T`.
    pub fn from_matrix(grid: Grid, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: m.ncols(),
            });
        }
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter().copied());
        }
        CurveSet::from_rows(grid, data)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let t = self.grid.len();
        &self.data[i * t..(i + 1) * t]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.grid.len())
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.row(i).to_vec(),
        }
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    /// The `n x T` value table.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.grid.len(), &self.data)
    }

    /// Subset in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.grid.len());
        for &i in indices {
            if i >= self.n {
                return Err(Error::invalid("curve index out of range"));
            }
            data.extend_from_slice(self.row(i));
        }
        CurveSet::from_rows(self.grid.clone(), data)
    }

    pub(crate) fn check_compatible(&self, other: &CurveSet) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        if self.n != other.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(())
    }
}
