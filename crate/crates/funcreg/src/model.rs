//! JSON model documents. Every document carries an `estimator` tag and a
//! `format_version`; floats are written in shortest round-trip form.

use std::path::Path;

use funcreg_core::baselines::{BsplineBasis, LinearModel, NwModel};
use funcreg_core::nalgebra::DMatrix;
use funcreg_core::{CurveSet, Grid, PenaltyVariant, RkhsModel, RkhsParams};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkhsDocument {
    pub format_version: u32,
    pub variant: String,
    pub sigma: f64,
    pub sigma_prime: f64,
    pub lambda: f64,
    pub grid: Vec<f64>,
    pub train_x: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NwDocument {
    pub format_version: u32,
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDocument {
    pub format_version: u32,
    pub spline_order: usize,
    pub breakpoints: Vec<f64>,
    pub lambda: f64,
    pub grid: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Rows index the covariate argument `s`, columns the response argument `t`.
    pub beta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "lowercase")]
pub enum ModelDocument {
    Rkhs(RkhsDocument),
    Nw(NwDocument),
    Linear(LinearDocument),
}

/// A loaded model ready to predict.
#[derive(Debug, Clone)]
pub enum Predictor {
    Rkhs(RkhsModel),
    Nw(NwModel),
    Linear(LinearModel),
}

impl Predictor {
    pub fn grid(&self) -> &Grid {
        match self {
            Predictor::Rkhs(m) => m.grid(),
            Predictor::Nw(m) => m.train_x().grid(),
            Predictor::Linear(m) => m.grid(),
        }
    }

    pub fn predict_set(&self, xs: &CurveSet) -> funcreg_core::Result<CurveSet> {
        match self {
            Predictor::Rkhs(m) => m.predict_set(xs),
            Predictor::Nw(m) => m.predict_set(xs),
            Predictor::Linear(m) => m.predict_set(xs),
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        match self {
            Predictor::Rkhs(m) => ModelDocument::Rkhs(RkhsDocument {
                format_version: FORMAT_VERSION,
                variant: m.params().variant.as_str().to_string(),
                sigma: m.params().sigma,
                sigma_prime: m.params().sigma_prime,
                lambda: m.params().lambda,
                grid: m.grid().points().to_vec(),
                train_x: rows(m.train_x()),
                b: matrix_rows(m.coefficients()),
            }),
            Predictor::Nw(m) => ModelDocument::Nw(NwDocument {
                format_version: FORMAT_VERSION,
                bandwidth: m.bandwidth(),
                grid: m.train_x().grid().points().to_vec(),
                train_x: rows(m.train_x()),
                train_y: rows(m.train_y()),
            }),
            Predictor::Linear(m) => ModelDocument::Linear(LinearDocument {
                format_version: FORMAT_VERSION,
                spline_order: m.basis().order(),
                breakpoints: m.basis().breakpoints().to_vec(),
                lambda: m.penalty_lambda(),
                grid: m.grid().points().to_vec(),
                alpha: m.alpha_coeffs().to_vec(),
                beta: matrix_rows(m.beta_coeffs()),
            }),
        }
    }
}

fn rows(set: &CurveSet) -> Vec<Vec<f64>> {
    set.rows().map(<[f64]>::to_vec).collect()
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix_from_rows(
    rows: &[Vec<f64>],
    ncols: usize,
    what: &str,
) -> std::result::Result<DMatrix<f64>, String> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("every row of `{what}` must have {ncols} entries"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn curve_set(grid: &Grid, rows: &[Vec<f64>], what: &str) -> std::result::Result<CurveSet, String> {
    if rows.iter().any(|r| r.len() != grid.len()) {
        return Err(format!(
            "every row of `{what}` must have {} entries",
            grid.len()
        ));
    }
    CurveSet::from_rows(grid.clone(), rows.concat()).map_err(|e| format!("`{what}`: {e}"))
}

impl ModelDocument {
    fn format_version(&self) -> u32 {
        match self {
            ModelDocument::Rkhs(d) => d.format_version,
            ModelDocument::Nw(d) => d.format_version,
            ModelDocument::Linear(d) => d.format_version,
        }
    }

    fn grid(&self) -> &[f64] {
        match self {
            ModelDocument::Rkhs(d) => &d.grid,
            ModelDocument::Nw(d) => &d.grid,
            ModelDocument::Linear(d) => &d.grid,
        }
    }

    /// Validates the document and rebuilds the model.
    pub fn into_predictor(self) -> std::result::Result<Predictor, String> {
        if self.format_version() != FORMAT_VERSION {
            return Err(format!(
                "unsupported format_version {}",
                self.format_version()
            ));
        }
        let grid = Grid::new(self.grid().to_vec()).map_err(|e| format!("`grid`: {e}"))?;
        match self {
            ModelDocument::Rkhs(d) => {
                let variant: PenaltyVariant = d.variant.parse().map_err(|e| format!("{e}"))?;
                let train_x = curve_set(&grid, &d.train_x, "train_x")?;
                let b = matrix_from_rows(&d.b, grid.len(), "B")?;
                let params = RkhsParams {
                    sigma: d.sigma,
                    sigma_prime: d.sigma_prime,
                    lambda: d.lambda,
                    variant,
                };
                RkhsModel::from_parts(train_x, b, params)
                    .map(Predictor::Rkhs)
                    .map_err(|e| e.to_string())
            }
            ModelDocument::Nw(d) => {
                let train_x = curve_set(&grid, &d.train_x, "train_x")?;
                let train_y = curve_set(&grid, &d.train_y, "train_y")?;
                NwModel::new(train_x, train_y, d.bandwidth)
                    .map(Predictor::Nw)
                    .map_err(|e| e.to_string())
            }
            ModelDocument::Linear(d) => {
                let basis =
                    BsplineBasis::new(d.spline_order, d.breakpoints).map_err(|e| e.to_string())?;
                let beta = matrix_from_rows(&d.beta, basis.count(), "beta")?;
                LinearModel::from_parts(basis, grid, d.alpha, beta, d.lambda)
                    .map(Predictor::Linear)
                    .map_err(|e| e.to_string())
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model documents always serialise");
        s.push('\n');
        s
    }
}

pub fn save_model(path: &Path, model: &Predictor) -> Result<()> {
    write_atomic(path, model.to_document().to_json().as_bytes())
}

pub fn load_model(path: &Path) -> Result<Predictor> {
    let text = read_to_string(path)?;
    let doc: ModelDocument =
        serde_json::from_str(&text).map_err(|e| Error::file(path, e.to_string()))?;
    doc.into_predictor().map_err(|m| Error::file(path, m))
}
