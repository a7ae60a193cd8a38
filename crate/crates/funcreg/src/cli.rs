//! Command-line interface. Exit status: 0 on success, 2 on invalid input,
//! 3 when the numerics fail.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use funcreg_core::baselines::{linear_fit, BsplineBasis, NwModel};
use funcreg_core::kernel::{default_sigma, default_sigma_prime, GramPair};
use funcreg_core::rkhs::{self, log_grid};
use funcreg_core::sim::{SimConfig, SimModel};
use funcreg_core::weather::{leave_one_out, LooConfig, WeatherDataset};
use funcreg_core::{CurveSet, PenaltyVariant, RkhsParams};
use serde::Serialize;

use crate::bench::{run_models, threads_from_env};
use crate::error::{Context, Error, Result};
use crate::io::{provenance_line, read_curve_set, read_curves, write_atomic, CurveTable};
use crate::model::{load_model, save_model, Predictor};
use crate::report;
use crate::weather_io::load_weather;

#[derive(Debug, Parser)]
#[command(
    name = "funcreg",
    version,
    about = "Curve-on-curve regression with operator-valued kernels"
)]
pub struct Cli {
    /// Omit the timestamp comment line from CSV outputs.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and save it as JSON.
    Fit(FitArgs),
    /// Predict response curves with a saved model.
    Predict(PredictArgs),
    /// Run the simulation benchmark.
    Simulate(SimulateArgs),
    /// Score a range of penalties by GCV and optionally by validation error.
    GcvScan(GcvScanArgs),
    /// Leave-one-out prediction of log precipitation from temperature.
    WeatherLoo(WeatherArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Rkhs,
    RkhsMod,
    Nw,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelEstimatorArg {
    Rkhs,
    RkhsMod,
}

impl KernelEstimatorArg {
    fn variant(self) -> PenaltyVariant {
        match self {
            KernelEstimatorArg::Rkhs => PenaltyVariant::Standard,
            KernelEstimatorArg::RkhsMod => PenaltyVariant::Modified,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    A,
    B,
    C,
    D,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct LambdaRange {
    #[arg(long, default_value_t = 1e-4)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 1e3)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 25)]
    pub lambda_count: usize,
}

impl LambdaRange {
    fn grid(&self) -> Result<Vec<f64>> {
        log_grid(self.lambda_min, self.lambda_max, self.lambda_count)
            .context(|| "lambda range".to_string())
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, value_enum)]
    pub estimator: EstimatorArg,
    /// Penalty for the kernel and linear estimators.
    #[arg(long, conflicts_with = "gcv")]
    pub lambda: Option<f64>,
    /// Choose the penalty by generalised cross-validation.
    #[arg(long)]
    pub gcv: bool,
    #[command(flatten)]
    pub range: LambdaRange,
    /// Covariate kernel bandwidth; defaults to the mean pairwise distance.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Grid kernel bandwidth; defaults to the mean pairwise grid spacing.
    #[arg(long)]
    pub sigma_prime: Option<f64>,
    /// Nadaraya-Watson bandwidth; defaults to the mean pairwise distance.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub spline_order: usize,
    #[arg(long, default_value_t = 10)]
    pub breakpoints: usize,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Fit report (JSON); printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub model: ModelArg,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 30)]
    pub n_train: usize,
    #[arg(long, default_value_t = 50)]
    pub n_valid: usize,
    #[arg(long, default_value_t = 50)]
    pub n_test: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, default_value = "benchmark_report.csv")]
    pub out: PathBuf,
    /// Per-replicate results.
    #[arg(long)]
    pub detail: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GcvScanArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, requires = "valid_y")]
    pub valid_x: Option<PathBuf>,
    #[arg(long, requires = "valid_x")]
    pub valid_y: Option<PathBuf>,
    #[command(flatten)]
    pub range: LambdaRange,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sigma_prime: Option<f64>,
    #[arg(long, value_enum, default_value = "rkhs")]
    pub estimator: KernelEstimatorArg,
    #[arg(long, default_value = "gcv.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct WeatherArgs {
    #[arg(long)]
    pub temp: PathBuf,
    #[arg(long)]
    pub precip: PathBuf,
    /// Stand-in value for days with zero precipitation before taking logs.
    #[arg(long, default_value_t = funcreg_core::weather::DEFAULT_PRECIP_OFFSET)]
    pub precip_offset: f64,
    #[arg(long, value_enum, default_value = "rkhs")]
    pub estimator: KernelEstimatorArg,
    #[command(flatten)]
    pub range: LambdaRange,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sigma_prime: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a, cli.deterministic),
        Command::Simulate(a) => cmd_simulate(a, cli.deterministic),
        Command::GcvScan(a) => cmd_gcv_scan(a, cli.deterministic),
        Command::WeatherLoo(a) => cmd_weather_loo(a, cli.deterministic),
    }
}

fn check_positive(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(Error::Input(format!("{name} must be positive")))
        }
        _ => Ok(()),
    }
}

fn read_pair(x: &Path, y: &Path) -> Result<(CurveSet, CurveSet)> {
    let xs = read_curve_set(x)?;
    let ys = read_curve_set(y)?;
    if xs.len() != ys.len() {
        return Err(Error::Input(format!(
            "{} has {} curves but {} has {}",
            x.display(),
            xs.len(),
            y.display(),
            ys.len()
        )));
    }
    if !xs.grid().same_as(ys.grid()) {
        return Err(Error::Input(format!(
            "{} and {} use different grids",
            x.display(),
            y.display()
        )));
    }
    Ok((xs, ys))
}

#[derive(Debug, Serialize)]
struct GcvTrace {
    lambdas: Vec<f64>,
    scores: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
struct FitReport {
    estimator: &'static str,
    n_curves: usize,
    grid_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_prime: Option<f64>,
    /// Penalised objective for the kernel and linear estimators, residual
    /// sum of squares for Nadaraya-Watson.
    objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gcv: Option<GcvTrace>,
}

fn estimator_name(e: EstimatorArg) -> &'static str {
    match e {
        EstimatorArg::Rkhs => "rkhs",
        EstimatorArg::RkhsMod => "rkhs-mod",
        EstimatorArg::Nw => "nw",
        EstimatorArg::Linear => "linear",
    }
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    check_positive("lambda", a.lambda)?;
    check_positive("sigma", a.sigma)?;
    check_positive("sigma-prime", a.sigma_prime)?;
    check_positive("bandwidth", a.bandwidth)?;
    let (xs, ys) = read_pair(&a.x, &a.y)?;
    let mut report = FitReport {
        estimator: estimator_name(a.estimator),
        n_curves: xs.len(),
        grid_points: xs.grid().len(),
        lambda: None,
        bandwidth: None,
        sigma: None,
        sigma_prime: None,
        objective: f64::NAN,
        gcv: None,
    };
    let model = match a.estimator {
        EstimatorArg::Rkhs | EstimatorArg::RkhsMod => {
            let variant = if a.estimator == EstimatorArg::Rkhs {
                PenaltyVariant::Standard
            } else {
                PenaltyVariant::Modified
            };
            let sigma = match a.sigma {
                Some(s) => s,
                None => default_sigma(&xs)
                    .context(|| format!("{}: covariate bandwidth", a.x.display()))?,
            };
            let sigma_prime = a
                .sigma_prime
                .unwrap_or_else(|| default_sigma_prime(xs.grid()));
            let lambda = match (a.lambda, a.gcv) {
                (Some(l), _) => l,
                (None, true) => {
                    let curve =
                        rkhs::gcv_select(&xs, &ys, sigma, sigma_prime, &a.range.grid()?, variant)
                            .context(|| "GCV selection".to_string())?;
                    report.gcv = Some(GcvTrace {
                        lambdas: curve.lambdas.clone(),
                        scores: curve
                            .scores
                            .iter()
                            .map(|s| s.is_finite().then_some(*s))
                            .collect(),
                    });
                    curve.selected_lambda()
                }
                (None, false) => {
                    return Err(Error::Input("either --lambda or --gcv is required".into()))
                }
            };
            let params = RkhsParams {
                sigma,
                sigma_prime,
                lambda,
                variant,
            };
            let model = rkhs::fit(&xs, &ys, &params).context(|| "fit".to_string())?;
            let gram =
                GramPair::build(&xs, sigma, sigma_prime).context(|| "Gram matrices".to_string())?;
            report.objective = rkhs::objective(
                &gram,
                &ys.to_matrix(),
                model.coefficients(),
                lambda,
                variant,
            )
            .context(|| "objective".to_string())?;
            report.lambda = Some(lambda);
            report.sigma = Some(sigma);
            report.sigma_prime = Some(sigma_prime);
            Predictor::Rkhs(model)
        }
        EstimatorArg::Nw => {
            if a.gcv || a.lambda.is_some() {
                return Err(Error::Input("nw takes --bandwidth, not a penalty".into()));
            }
            let h = a
                .bandwidth
                .unwrap_or_else(|| default_sigma(&xs).unwrap_or(1.0));
            let model = NwModel::new(xs.clone(), ys.clone(), h).context(|| "fit".to_string())?;
            let fitted = model
                .predict_set(&xs)
                .context(|| "fitted values".to_string())?;
            report.objective = (fitted.to_matrix() - ys.to_matrix()).norm_squared();
            report.bandwidth = Some(h);
            Predictor::Nw(model)
        }
        EstimatorArg::Linear => {
            if a.gcv {
                return Err(Error::Input(
                    "--gcv is only available for the kernel estimators".into(),
                ));
            }
            let lambda = a
                .lambda
                .ok_or_else(|| Error::Input("linear requires --lambda".into()))?;
            let basis = BsplineBasis::equispaced(a.spline_order, a.breakpoints)
                .context(|| "spline basis".to_string())?;
            let model = linear_fit(&xs, &ys, &basis, lambda).context(|| "fit".to_string())?;
            report.objective = model
                .objective(&xs, &ys)
                .context(|| "objective".to_string())?;
            report.lambda = Some(lambda);
            Predictor::Linear(model)
        }
    };
    save_model(&a.out, &model)?;
    let mut text = serde_json::to_string_pretty(&report).expect("report serialises");
    text.push('\n');
    match &a.report {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn cmd_predict(a: &PredictArgs, deterministic: bool) -> Result<()> {
    let model = load_model(&a.model)?;
    let table = read_curves(&a.x)?;
    if let Some(g) = &table.grid {
        if !g.same_as(model.grid()) {
            return Err(Error::file(&a.x, "grid does not match the model grid"));
        }
    }
    let out = if table.is_empty() {
        CurveTable {
            grid: Some(model.grid().clone()),
            rows: Vec::new(),
        }
    } else {
        let xs = table.to_set(&a.x)?;
        let pred = model
            .predict_set(&xs)
            .context(|| "prediction".to_string())?;
        CurveTable::from_set(&pred)
    };
    let text = provenance_line(deterministic) + &out.to_csv();
    write_atomic(&a.out, text.as_bytes())
}

fn cmd_simulate(a: &SimulateArgs, deterministic: bool) -> Result<()> {
    let models: Vec<SimModel> = match a.model {
        ModelArg::A => vec![SimModel::A],
        ModelArg::B => vec![SimModel::B],
        ModelArg::C => vec![SimModel::C],
        ModelArg::D => vec![SimModel::D],
        ModelArg::All => SimModel::ALL.to_vec(),
    };
    let mut cfg = SimConfig::new(models[0], a.seed);
    cfg.reps = a.reps;
    cfg.grid_size = a.grid_size;
    cfg.n_train = a.n_train;
    cfg.n_valid = a.n_valid;
    cfg.n_test = a.n_test;
    cfg.noise_sd = a.noise_sd;
    cfg.validate()
        .context(|| "simulation settings".to_string())?;
    let threads = threads_from_env()?;
    let (bench, details) = run_models(&cfg, &models, threads)?;
    let text = provenance_line(deterministic) + &report::benchmark_csv(&bench);
    write_atomic(&a.out, text.as_bytes())?;
    if let Some(p) = &a.detail {
        let text = provenance_line(deterministic) + &report::rep_detail_csv(&details);
        write_atomic(p, text.as_bytes())?;
    }
    for r in &bench.rows {
        println!(
            "{:>2} {:<10} mse {:>10.4} relative {:>7.3} failures {}",
            r.model.as_str(),
            r.estimator.as_str(),
            r.mean_mse_clean,
            r.relative_to_rkhs,
            r.failures
        );
    }
    Ok(())
}

fn cmd_gcv_scan(a: &GcvScanArgs, deterministic: bool) -> Result<()> {
    check_positive("sigma", a.sigma)?;
    check_positive("sigma-prime", a.sigma_prime)?;
    let lambdas = a.range.grid()?;
    let (xs, ys) = read_pair(&a.x, &a.y)?;
    let sigma = match a.sigma {
        Some(s) => s,
        None => default_sigma(&xs).context(|| format!("{}: covariate bandwidth", a.x.display()))?,
    };
    let sigma_prime = a
        .sigma_prime
        .unwrap_or_else(|| default_sigma_prime(xs.grid()));
    let variant = a.estimator.variant();
    let gcv = rkhs::gcv_select(&xs, &ys, sigma, sigma_prime, &lambdas, variant)
        .context(|| "GCV scan".to_string())?;
    let validation = match (&a.valid_x, &a.valid_y) {
        (Some(vx), Some(vy)) => {
            let (vxs, vys) = read_pair(vx, vy)?;
            if !vxs.grid().same_as(xs.grid()) {
                return Err(Error::file(vx, "grid does not match the training grid"));
            }
            Some(
                rkhs::validation_scan(&xs, &ys, &vxs, &vys, sigma, sigma_prime, &lambdas, variant)
                    .context(|| "validation scan".to_string())?,
            )
        }
        _ => None,
    };
    let text = provenance_line(deterministic) + &report::gcv_csv(&gcv, validation.as_ref());
    write_atomic(&a.out, text.as_bytes())?;
    println!("gcv selects lambda = {}", gcv.selected_lambda());
    if let Some(v) = &validation {
        println!("validation selects lambda = {}", v.selected_lambda());
    }
    Ok(())
}

fn cmd_weather_loo(a: &WeatherArgs, deterministic: bool) -> Result<()> {
    check_positive("precip-offset", Some(a.precip_offset))?;
    check_positive("sigma", a.sigma)?;
    check_positive("sigma-prime", a.sigma_prime)?;
    let data = load_weather(&a.temp, &a.precip)?;
    let cfg = LooConfig {
        variant: a.estimator.variant(),
        precip_offset: a.precip_offset,
        lambda_grid: a.range.grid()?,
        sigma: a.sigma,
        sigma_prime: a.sigma_prime,
    };
    let loo = leave_one_out(&data, &cfg).context(|| "leave-one-out".to_string())?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let grid = WeatherDataset::grid();
    for fold in &loo.folds {
        match &fold.result {
            Ok(r) => {
                let name = format!(
                    "predictions_{}.csv",
                    report::station_file_stem(&fold.station_id)
                );
                let text = provenance_line(deterministic)
                    + &report::prediction_csv(grid.points(), &r.observed, &r.predicted);
                write_atomic(&a.out_dir.join(name), text.as_bytes())?;
            }
            Err(e) => eprintln!("warning: station {}: {e}", fold.station_id),
        }
    }
    let text = provenance_line(deterministic) + &report::loo_summary_csv(&loo);
    write_atomic(&a.out_dir.join("loo_summary.csv"), text.as_bytes())?;
    if loo.failures() == loo.folds.len() {
        return Err(Error::core(
            "leave-one-out",
            funcreg_core::Error::AllCandidatesFailed("every fold failed".into()),
        ));
    }
    println!(
        "stations {}  failures {}  mean mse {:.6}  mean-curve baseline {:.6}",
        loo.folds.len(),
        loo.failures(),
        loo.mean_mse(),
        loo.mean_baseline_mse()
    );
    Ok(())
}
