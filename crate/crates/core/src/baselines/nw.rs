//! Nadaraya-Watson functional kernel estimate with a Gaussian kernel on L2 distance.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::curve::{sq_distance_slices, Curve, CurveSet};
use crate::error::{Error, Result};
use crate::kernel::{cross_sq_distances, ScalarKernel};
use crate::rkhs::{first_argmin, validate_positive_grid};

#[derive(Debug, Clone)]
pub struct NwModel {
    train_x: CurveSet,
    train_y: CurveSet,
    bandwidth: f64,
}

impl NwModel {
    pub fn new(train_x: CurveSet, train_y: CurveSet, bandwidth: f64) -> Result<Self> {
        train_x.check_compatible(&train_y)?;
        ScalarKernel::new(bandwidth)?;
        Ok(NwModel {
            train_x,
            train_y,
            bandwidth,
        })
    }

    pub fn train_x(&self) -> &CurveSet {
        &self.train_x
    }

    pub fn train_y(&self) -> &CurveSet {
        &self.train_y
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Normalised weights of the training curves for `x_new`.
    pub fn weights(&self, x_new: &Curve) -> Result<Vec<f64>> {
        if !x_new.grid().same_as(self.train_x.grid()) {
            return Err(Error::GridMismatch);
        }
        let pts = x_new.grid().points();
        let d2: Vec<f64> = self
            .train_x
            .rows()
            .map(|xi| sq_distance_slices(xi, x_new.values(), pts))
            .collect();
        nw_weights(&d2, self.bandwidth)
    }

    pub fn predict(&self, x_new: &Curve) -> Result<Curve> {
        let w = self.weights(x_new)?;
        Curve::new(x_new.grid().clone(), combine(&w, &self.train_y))
    }

    pub fn predict_set(&self, xs: &CurveSet) -> Result<CurveSet> {
        let curves = (0..xs.len())
            .map(|i| self.predict(&xs.curve(i)))
            .collect::<Result<Vec<_>>>()?;
        CurveSet::from_curves(&curves)
    }
}

/// Gaussian weights `exp(-d_i^2 / 2h^2)` normalised to sum to one.
///
/// The smallest squared distance is subtracted before exponentiating, so the
/// nearest curve always has unnormalised weight 1.
pub fn nw_weights(sq_dists: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    let kern = ScalarKernel::new(bandwidth)?;
    let min = sq_dists.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::WeightUnderflow);
    }
    let mut w: Vec<f64> = sq_dists.iter().map(|d| kern.eval_sq(d - min)).collect();
    let total: f64 = w.iter().sum();
    if !(total > 1e-300) || !total.is_finite() {
        return Err(Error::WeightUnderflow);
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

fn combine(weights: &[f64], ys: &CurveSet) -> Vec<f64> {
    let mut out = alloc::vec![0.0; ys.grid().len()];
    for (w, yi) in weights.iter().zip(ys.rows()) {
        for (o, v) in out.iter_mut().zip(yi) {
            *o += w * v;
        }
    }
    out
}

/// Mean over curves and grid points of the squared prediction error.
pub fn mean_squared_error(pred: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
    (pred - target).norm_squared() / pred.len() as f64
}

/// Validation scores for each candidate bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSearch {
    pub bandwidths: Vec<f64>,
    pub scores: Vec<f64>,
    pub argmin_index: usize,
}

impl BandwidthSearch {
    pub fn selected(&self) -> f64 {
        self.bandwidths[self.argmin_index]
    }
}

/// Predictions for every validation curve from precomputed squared distances.
pub(crate) fn predict_from_distances(
    d2: &DMatrix<f64>,
    train_y: &CurveSet,
    bandwidth: f64,
) -> Result<DMatrix<f64>> {
    let t = train_y.grid().len();
    let mut out = DMatrix::zeros(d2.nrows(), t);
    let mut row = Vec::with_capacity(d2.ncols());
    for v in 0..d2.nrows() {
        row.clear();
        row.extend(d2.row(v).iter().copied());
        let w = nw_weights(&row, bandwidth)?;
        for (l, val) in combine(&w, train_y).into_iter().enumerate() {
            out[(v, l)] = val;
        }
    }
    Ok(out)
}

/// Picks the bandwidth with the smallest validation MSE (first minimum on ties).
pub fn nw_bandwidth_search(
    train_x: &CurveSet,
    train_y: &CurveSet,
    valid_x: &CurveSet,
    valid_y: &CurveSet,
    h_grid: &[f64],
) -> Result<BandwidthSearch> {
    validate_positive_grid(h_grid, "bandwidth")?;
    train_x.check_compatible(train_y)?;
    valid_x.check_compatible(valid_y)?;
    let d2 = cross_sq_distances(valid_x, train_x)?;
    let target = valid_y.to_matrix();
    let scores: Vec<f64> = h_grid
        .iter()
        .map(|&h| match predict_from_distances(&d2, train_y, h) {
            Ok(p) => mean_squared_error(&p, &target),
            Err(_) => f64::INFINITY,
        })
        .collect();
    let argmin_index = first_argmin(&scores).ok_or(Error::WeightUnderflow)?;
    Ok(BandwidthSearch {
        bandwidths: h_grid.to_vec(),
        scores,
        argmin_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Grid;

    fn set(grid: &Grid, rows: &[&[f64]]) -> CurveSet {
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        CurveSet::from_rows(grid.clone(), data).unwrap()
    }

    #[test]
    fn single_curve_returns_its_response() {
        let g = Grid::uniform(3).unwrap();
        let m = NwModel::new(
            set(&g, &[&[0.0, 1.0, 2.0]]),
            set(&g, &[&[5.0, -1.0, 2.5]]),
            0.3,
        )
        .unwrap();
        let p = m.predict(&Curve::constant(g, 40.0).unwrap()).unwrap();
        assert_eq!(p.values(), &[5.0, -1.0, 2.5]);
    }

    #[test]
    fn equidistant_point_averages() {
        let g = Grid::uniform(3).unwrap();
        let xs = set(&g, &[&[0.0; 3], &[2.0; 3]]);
        let ys = set(&g, &[&[1.0, 2.0, 3.0], &[3.0, 2.0, -1.0]]);
        let m = NwModel::new(xs, ys, 0.8).unwrap();
        let p = m.predict(&Curve::constant(g, 1.0).unwrap()).unwrap();
        for (got, want) in p.values().iter().zip([2.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn stabilised_weights_survive_tiny_bandwidth() {
        let w = nw_weights(&[1e6, 1e6 + 1.0, 2e6], 1e-3).unwrap();
        assert_eq!(w[0], 1.0);
        assert_eq!(w[1], 0.0);
        let shifted = nw_weights(&[3.0 + 5.0, 4.0 + 5.0], 1.0).unwrap();
        let plain = nw_weights(&[3.0, 4.0], 1.0).unwrap();
        for (a, b) in shifted.iter().zip(&plain) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(nw_weights(&[], 1.0), Err(Error::WeightUnderflow));
    }

    #[test]
    fn bandwidth_search_edge_cases() {
        let g = Grid::uniform(4).unwrap();
        let xs = set(&g, &[&[0.0; 4], &[1.0; 4], &[3.0; 4]]);
        let ys = set(&g, &[&[0.0; 4], &[1.0; 4], &[9.0; 4]]);
        let s = nw_bandwidth_search(&xs, &ys, &xs, &ys, &[0.7]).unwrap();
        assert_eq!(s.selected(), 0.7);

        // validation equals training: the smallest bandwidth interpolates
        let s = nw_bandwidth_search(&xs, &ys, &xs, &ys, &[0.01, 0.1, 1.0, 10.0]).unwrap();
        assert_eq!(s.argmin_index, 0);
        assert!(s.scores.windows(2).all(|w| w[0] <= w[1]));

        // a single training curve predicts the same thing for every bandwidth
        let one_x = set(&g, &[&[0.0; 4]]);
        let one_y = set(&g, &[&[2.0; 4]]);
        let s = nw_bandwidth_search(&one_x, &one_y, &xs, &ys, &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(s.argmin_index, 0);

        assert!(nw_bandwidth_search(&xs, &ys, &xs, &ys, &[]).is_err());
        assert!(nw_bandwidth_search(&xs, &ys, &xs, &ys, &[1.0, 0.5]).is_err());
    }
}
