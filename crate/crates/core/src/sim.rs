//! Synthetic curve-on-curve data and the train / validation / test benchmark.
//!
//! Covariates are Brownian paths started uniformly in [0, 5]; responses come
//! from one of four generating models and receive i.i.d. Gaussian noise at
//! every grid point. Every curve draws from its own ChaCha8 stream whose
//! 256-bit key is the little-endian concatenation of
//! `(seed, rep, role, curve_index)`, so datasets are reproducible and reps can
//! run in any order on any number of workers.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::baselines::nw::predict_from_distances;
use crate::baselines::{mean_squared_error, BsplineBasis, LinearDesign};
use crate::curve::{Curve, CurveSet, Grid};
use crate::error::{Error, Result};
use crate::kernel::{self, cross_sq_distances, GramPair};
use crate::rkhs::{self, first_argmin, PenaltyVariant, SpectralGram};

/// Generating model for the responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimModel {
    /// `y(t) = int |t - s| x(s) ds`
    A,
    /// `y(t) = int |t - s| x(s)^2 ds`
    B,
    /// `y(t) = sin(2 pi t) x(t)`
    C,
    /// `y(t) = cos(pi t) |x(t)|`
    D,
}

impl SimModel {
    pub const ALL: [SimModel; 4] = [SimModel::A, SimModel::B, SimModel::C, SimModel::D];

    pub fn as_str(self) -> &'static str {
        match self {
            SimModel::A => "a",
            SimModel::B => "b",
            SimModel::C => "c",
            SimModel::D => "d",
        }
    }
}

impl core::str::FromStr for SimModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(SimModel::A),
            "b" => Ok(SimModel::B),
            "c" => Ok(SimModel::C),
            "d" => Ok(SimModel::D),
            other => Err(Error::invalid(format!(
                "unknown simulation model `{other}` (expected a, b, c or d)"
            ))),
        }
    }
}

/// Candidate grids searched on the validation set.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionGrids {
    pub rkhs_lambdas: Vec<f64>,
    pub linear_lambdas: Vec<f64>,
    /// Multiples of the mean training distance tried as N-W bandwidths.
    pub nw_bandwidth_factors: Vec<f64>,
    pub spline_order: usize,
    pub spline_breakpoints: usize,
}

impl Default for SelectionGrids {
    fn default() -> Self {
        SelectionGrids {
            rkhs_lambdas: rkhs::default_lambda_grid(),
            linear_lambdas: rkhs::default_lambda_grid(),
            nw_bandwidth_factors: rkhs::log_grid(0.01, 10.0, 31).expect("static grid"),
            spline_order: 4,
            spline_breakpoints: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: SimModel,
    pub grid_size: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub reps: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub grids: SelectionGrids,
}

impl SimConfig {
    pub fn new(model: SimModel, seed: u64) -> Self {
        SimConfig {
            model,
            grid_size: 50,
            n_train: 30,
            n_valid: 50,
            n_test: 50,
            reps: 50,
            noise_sd: 1.0,
            seed,
            grids: SelectionGrids::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::invalid("grid size must be at least 2"));
        }
        if self.n_train == 0 || self.n_valid == 0 || self.n_test == 0 || self.reps == 0 {
            return Err(Error::invalid("curve counts and reps must be at least 1"));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::invalid(
                "noise standard deviation must be nonnegative",
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::uniform(self.grid_size)
    }

    fn count(&self, role: Role) -> usize {
        match role {
            Role::Train => self.n_train,
            Role::Valid => self.n_valid,
            Role::Test => self.n_test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Valid,
    Test,
}

impl Role {
    fn key(self) -> u64 {
        match self {
            Role::Train => 0,
            Role::Valid => 1,
            Role::Test => 2,
        }
    }
}

/// Independent generator for one curve of one role of one rep.
pub fn curve_rng(seed: u64, rep: u64, role: Role, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, rep, role.key(), index]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Brownian path on the grid with `x(t_1) ~ U[0, 5]` and `N(0, dt)` increments.
pub fn gen_brownian<R: RngCore + ?Sized>(rng: &mut R, grid: &Grid) -> Curve {
    let start = Uniform::new(0.0, 5.0).expect("valid range").sample(rng);
    let pts = grid.points();
    let mut values = Vec::with_capacity(pts.len());
    values.push(start);
    for w in pts.windows(2) {
        let z: f64 = StandardNormal.sample(rng);
        let prev = *values.last().unwrap();
        values.push(prev + libm::sqrt(w[1] - w[0]) * z);
    }
    Curve::new(grid.clone(), values).expect("Brownian path is finite")
}

/// Noise-free response of `model` to covariate `x`.
pub fn apply_model(model: SimModel, x: &Curve) -> Curve {
    let grid = x.grid();
    let pts = grid.points();
    let xv = x.values();
    let values: Vec<f64> = match model {
        SimModel::A | SimModel::B => {
            let f: Vec<f64> = match model {
                SimModel::A => xv.to_vec(),
                _ => xv.iter().map(|v| v * v).collect(),
            };
            pts.iter()
                .map(|&t| {
                    let integrand: Vec<f64> = pts
                        .iter()
                        .zip(&f)
                        .map(|(s, fv)| (t - s).abs() * fv)
                        .collect();
                    crate::curve::trapezoid_unchecked(&integrand, pts)
                })
                .collect()
        }
        SimModel::C => pts
            .iter()
            .zip(xv)
            .map(|(t, v)| libm::sin(2.0 * core::f64::consts::PI * t) * v)
            .collect(),
        SimModel::D => pts
            .iter()
            .zip(xv)
            .map(|(t, v)| libm::cos(core::f64::consts::PI * t) * v.abs())
            .collect(),
    };
    Curve::new(grid.clone(), values).expect("model response is finite")
}

/// Covariates with noisy and clean responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub xs: CurveSet,
    pub ys_noisy: CurveSet,
    pub ys_clean: CurveSet,
}

pub fn gen_dataset(config: &SimConfig, role: Role, rep: u64) -> Result<Dataset> {
    config.validate()?;
    let grid = config.grid()?;
    let n = config.count(role);
    let t = grid.len();
    let mut xs = Vec::with_capacity(n * t);
    let mut clean = Vec::with_capacity(n * t);
    let mut noisy = Vec::with_capacity(n * t);
    for i in 0..n {
        let mut rng = curve_rng(config.seed, rep, role, i as u64);
        let x = gen_brownian(&mut rng, &grid);
        let y = apply_model(config.model, &x);
        for &v in y.values() {
            let z: f64 = StandardNormal.sample(&mut rng);
            noisy.push(v + config.noise_sd * z);
        }
        xs.extend_from_slice(x.values());
        clean.extend_from_slice(y.values());
    }
    Ok(Dataset {
        xs: CurveSet::from_rows(grid.clone(), xs)?,
        ys_noisy: CurveSet::from_rows(grid.clone(), noisy)?,
        ys_clean: CurveSet::from_rows(grid, clean)?,
    })
}

/// The five compared estimators, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Rkhs,
    ModifiedRkhs,
    Linear,
    /// N-W fitted on noise-free training responses.
    OracleNw,
    Nw,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Rkhs,
        Estimator::ModifiedRkhs,
        Estimator::Linear,
        Estimator::OracleNw,
        Estimator::Nw,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Rkhs => "rkhs",
            Estimator::ModifiedRkhs => "rkhs-mod",
            Estimator::Linear => "linear",
            Estimator::OracleNw => "oracle-nw",
            Estimator::Nw => "nw",
        }
    }
}

/// Test errors of one estimator in one rep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub mse_clean: f64,
    pub mse_noisy: f64,
    /// Selected lambda (RKHS, linear) or bandwidth (N-W).
    pub selected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub rep: u64,
    pub cells: Vec<(Estimator, Result<CellResult, String>)>,
}

impl RepOutcome {
    pub fn cell(&self, est: Estimator) -> Option<&Result<CellResult, String>> {
        self.cells.iter().find(|(e, _)| *e == est).map(|(_, r)| r)
    }
}

struct RepData {
    train: Dataset,
    valid: Dataset,
    test: Dataset,
}

impl RepData {
    fn generate(config: &SimConfig, rep: u64) -> Result<Self> {
        Ok(RepData {
            train: gen_dataset(config, Role::Train, rep)?,
            valid: gen_dataset(config, Role::Valid, rep)?,
            test: gen_dataset(config, Role::Test, rep)?,
        })
    }

    fn score(&self, pred: &DMatrix<f64>, selected: f64) -> CellResult {
        CellResult {
            mse_clean: mean_squared_error(pred, &self.test.ys_clean.to_matrix()),
            mse_noisy: mean_squared_error(pred, &self.test.ys_noisy.to_matrix()),
            selected,
        }
    }
}

/// RKHS pieces shared by both variants within one rep.
struct RkhsRep {
    spec: SpectralGram,
    k: DMatrix<f64>,
    a_valid: DMatrix<f64>,
    a_test: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl RkhsRep {
    fn new(data: &RepData) -> Result<Self> {
        let xs = &data.train.xs;
        let sigma = kernel::default_sigma(xs)?;
        let sigma_prime = kernel::default_sigma_prime(xs.grid());
        let gram = GramPair::build(xs, sigma, sigma_prime)?;
        Ok(RkhsRep {
            spec: SpectralGram::new(&gram)?,
            k: gram.k().clone(),
            a_valid: rkhs::cross_gram(&data.valid.xs, xs, sigma)?,
            a_test: rkhs::cross_gram(&data.test.xs, xs, sigma)?,
            y: data.train.ys_noisy.to_matrix(),
        })
    }

    /// `(B K)` at `lambda`; predictions are `a(x_new, X) (B K)`.
    fn alpha(&self, lambda: f64, variant: PenaltyVariant) -> Result<DMatrix<f64>> {
        Ok(self.spec.solve(&self.y, lambda, variant)? * &self.k)
    }

    fn validation_curve(
        &self,
        data: &RepData,
        lambdas: &[f64],
        variant: PenaltyVariant,
    ) -> Vec<f64> {
        let target = data.valid.ys_noisy.to_matrix();
        lambdas
            .iter()
            .map(|&l| match self.alpha(l, variant) {
                Ok(alpha) => mean_squared_error(&(&self.a_valid * alpha), &target),
                Err(_) => f64::INFINITY,
            })
            .collect()
    }

    fn test_prediction(&self, lambda: f64, variant: PenaltyVariant) -> Result<DMatrix<f64>> {
        Ok(&self.a_test * self.alpha(lambda, variant)?)
    }

    fn gcv_curve(&self, lambdas: &[f64], variant: PenaltyVariant) -> Vec<f64> {
        lambdas
            .iter()
            .map(|&l| self.spec.gcv(&self.y, l, variant).unwrap_or(f64::INFINITY))
            .collect()
    }
}

fn pick(grid: &[f64], scores: &[f64]) -> Result<f64> {
    first_argmin(scores)
        .map(|i| grid[i])
        .ok_or_else(|| Error::AllCandidatesFailed(String::from("no finite validation score")))
}

fn run_rkhs(
    data: &RepData,
    rk: &Result<RkhsRep>,
    lambdas: &[f64],
    variant: PenaltyVariant,
) -> Result<CellResult> {
    let rk = rk.as_ref().map_err(Clone::clone)?;
    let lambda = pick(lambdas, &rk.validation_curve(data, lambdas, variant))?;
    Ok(data.score(&rk.test_prediction(lambda, variant)?, lambda))
}

fn run_linear(data: &RepData, grids: &SelectionGrids) -> Result<CellResult> {
    let basis = BsplineBasis::equispaced(grids.spline_order, grids.spline_breakpoints)?;
    let design = LinearDesign::new(&data.train.xs, &data.train.ys_noisy, &basis)?;
    let target = data.valid.ys_noisy.to_matrix();
    let scores: Vec<f64> = grids
        .linear_lambdas
        .iter()
        .map(|&l| {
            design
                .solve(l)
                .and_then(|m| m.predict_matrix(&data.valid.xs))
                .map(|p| mean_squared_error(&p, &target))
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    let lambda = pick(&grids.linear_lambdas, &scores)?;
    let model = design.solve(lambda)?;
    Ok(data.score(&model.predict_matrix(&data.test.xs)?, lambda))
}

fn run_nw(data: &RepData, grids: &SelectionGrids, oracle: bool) -> Result<CellResult> {
    let train_y = if oracle {
        &data.train.ys_clean
    } else {
        &data.train.ys_noisy
    };
    let scale = kernel::default_sigma(&data.train.xs)?;
    let bandwidths: Vec<f64> = grids
        .nw_bandwidth_factors
        .iter()
        .map(|f| f * scale)
        .collect();
    let d_valid = cross_sq_distances(&data.valid.xs, &data.train.xs)?;
    let target = data.valid.ys_noisy.to_matrix();
    let scores: Vec<f64> = bandwidths
        .iter()
        .map(|&h| {
            predict_from_distances(&d_valid, train_y, h)
                .map(|p| mean_squared_error(&p, &target))
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    let h = pick(&bandwidths, &scores)?;
    let d_test = cross_sq_distances(&data.test.xs, &data.train.xs)?;
    Ok(data.score(&predict_from_distances(&d_test, train_y, h)?, h))
}

/// Fits, selects and evaluates all five estimators on one replicate.
pub fn run_rep(config: &SimConfig, rep: u64) -> Result<RepOutcome> {
    let data = RepData::generate(config, rep)?;
    let grids = &config.grids;
    let rk = RkhsRep::new(&data);
    let cells = Estimator::ALL
        .iter()
        .map(|&est| {
            let res = match est {
                Estimator::Rkhs => {
                    run_rkhs(&data, &rk, &grids.rkhs_lambdas, PenaltyVariant::Standard)
                }
                Estimator::ModifiedRkhs => {
                    run_rkhs(&data, &rk, &grids.rkhs_lambdas, PenaltyVariant::Modified)
                }
                Estimator::Linear => run_linear(&data, grids),
                Estimator::OracleNw => run_nw(&data, grids, true),
                Estimator::Nw => run_nw(&data, grids, false),
            };
            (est, res.map_err(|e| format!("{e}")))
        })
        .collect();
    Ok(RepOutcome { rep, cells })
}

/// Aggregated test error of one estimator under one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: SimModel,
    pub estimator: Estimator,
    pub mean_mse_clean: f64,
    pub mean_mse_noisy: f64,
    /// Standard error of `mean_mse_clean` across reps.
    pub se: f64,
    pub relative_to_rkhs: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn row(&self, model: SimModel, est: Estimator) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.estimator == est)
    }

    pub fn extend(&mut self, other: BenchmarkReport) {
        self.rows.extend(other.rows);
    }
}

/// Summarises rep outcomes in the order given; failures are counted, not averaged.
pub fn aggregate(model: SimModel, outcomes: &[RepOutcome]) -> BenchmarkReport {
    let mut rows: Vec<ReportRow> = Estimator::ALL
        .iter()
        .map(|&est| {
            let ok: Vec<&CellResult> = outcomes
                .iter()
                .filter_map(|o| o.cell(est).and_then(|r| r.as_ref().ok()))
                .collect();
            let failures = outcomes.len() - ok.len();
            let count = ok.len() as f64;
            let mean_clean = ok.iter().map(|c| c.mse_clean).sum::<f64>() / count;
            let mean_noisy = ok.iter().map(|c| c.mse_noisy).sum::<f64>() / count;
            let se = if ok.len() > 1 {
                let var = ok
                    .iter()
                    .map(|c| (c.mse_clean - mean_clean) * (c.mse_clean - mean_clean))
                    .sum::<f64>()
                    / (count - 1.0);
                libm::sqrt(var / count)
            } else {
                f64::NAN
            };
            ReportRow {
                model,
                estimator: est,
                mean_mse_clean: mean_clean,
                mean_mse_noisy: mean_noisy,
                se,
                relative_to_rkhs: f64::NAN,
                failures,
            }
        })
        .collect();
    let base = rows[0].mean_mse_clean;
    for r in rows.iter_mut() {
        r.relative_to_rkhs = if r.estimator == Estimator::Rkhs && base.is_finite() {
            1.0
        } else {
            r.mean_mse_clean / base
        };
    }
    BenchmarkReport { rows }
}

/// Runs every rep of `config.model` sequentially.
pub fn run_benchmark(config: &SimConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let outcomes = (0..config.reps as u64)
        .map(|rep| run_rep(config, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(config.model, &outcomes))
}

/// Lambda chosen by GCV on the training data versus by validation error.
#[derive(Debug, Clone, PartialEq)]
pub struct GcvComparison {
    pub lambdas: Vec<f64>,
    pub gcv_scores: Vec<f64>,
    pub validation_scores: Vec<f64>,
    pub gcv_lambda: f64,
    pub validation_lambda: f64,
    /// Clean-target test MSE at each selected lambda.
    pub gcv_test_mse: f64,
    pub validation_test_mse: f64,
}

pub fn gcv_vs_validation(
    config: &SimConfig,
    rep: u64,
    variant: PenaltyVariant,
) -> Result<GcvComparison> {
    let data = RepData::generate(config, rep)?;
    let rk = RkhsRep::new(&data)?;
    let lambdas = &config.grids.rkhs_lambdas;
    let gcv_scores = rk.gcv_curve(lambdas, variant);
    let validation_scores = rk.validation_curve(&data, lambdas, variant);
    let gcv_lambda = pick(lambdas, &gcv_scores)?;
    let validation_lambda = pick(lambdas, &validation_scores)?;
    let clean = data.test.ys_clean.to_matrix();
    let gcv_test_mse = mean_squared_error(&rk.test_prediction(gcv_lambda, variant)?, &clean);
    let validation_test_mse =
        mean_squared_error(&rk.test_prediction(validation_lambda, variant)?, &clean);
    Ok(GcvComparison {
        lambdas: lambdas.clone(),
        gcv_scores,
        validation_scores,
        gcv_lambda,
        validation_lambda,
        gcv_test_mse,
        validation_test_mse,
    })
}
