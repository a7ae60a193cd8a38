//! Daily station weather: weekly subsampling, log-precipitation, and
//! leave-one-station-out prediction of log precipitation from temperature.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::curve::{CurveSet, Grid};
use crate::error::{Error, Result};
use crate::kernel;
use crate::rkhs::{self, PenaltyVariant, RkhsParams};

pub const DAYS: usize = 365;
pub const WEEKS: usize = 53;
pub const DEFAULT_PRECIP_OFFSET: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub station_id: String,
    pub daily_temp: Vec<f64>,
    pub daily_precip: Vec<f64>,
}

impl StationSeries {
    pub fn new(
        station_id: impl Into<String>,
        daily_temp: Vec<f64>,
        daily_precip: Vec<f64>,
    ) -> Result<Self> {
        let station_id = station_id.into();
        for series in [&daily_temp, &daily_precip] {
            if series.len() != DAYS {
                return Err(Error::LengthMismatch {
                    expected: DAYS,
                    got: series.len(),
                });
            }
        }
        if let Some(i) = daily_temp.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some(i) = daily_precip.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some(i) = daily_precip.iter().position(|v| *v < 0.0) {
            return Err(Error::NegativeValue {
                index: i,
                value: daily_precip[i],
            });
        }
        Ok(StationSeries {
            station_id,
            daily_temp,
            daily_precip,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherDataset {
    stations: Vec<StationSeries>,
}

impl WeatherDataset {
    pub fn new(stations: Vec<StationSeries>) -> Result<Self> {
        if stations.len() < 2 {
            return Err(Error::invalid("at least two stations are required"));
        }
        let mut seen = BTreeSet::new();
        for s in &stations {
            if !seen.insert(s.station_id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate station `{}`",
                    s.station_id
                )));
            }
        }
        Ok(WeatherDataset { stations })
    }

    pub fn stations(&self) -> &[StationSeries] {
        &self.stations
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// The 53-point weekly grid on [0, 1].
    pub fn grid() -> Grid {
        Grid::uniform(WEEKS).expect("53 points form a valid grid")
    }

    /// Weekly temperature and weekly log-precipitation curve sets, in station order.
    pub fn curves(&self, precip_offset: f64) -> Result<(CurveSet, CurveSet)> {
        let mut temp = Vec::with_capacity(self.len() * WEEKS);
        let mut precip = Vec::with_capacity(self.len() * WEEKS);
        for s in &self.stations {
            temp.extend(weekly_subsample(&s.daily_temp)?);
            precip.extend(log_precip_transform(
                &weekly_subsample(&s.daily_precip)?,
                precip_offset,
            )?);
        }
        Ok((
            CurveSet::from_rows(Self::grid(), temp)?,
            CurveSet::from_rows(Self::grid(), precip)?,
        ))
    }
}

/// Days 1, 8, 15, ..., 365 (1-based) of a 365-day series.
pub fn weekly_subsample(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() != DAYS {
        return Err(Error::LengthMismatch {
            expected: DAYS,
            got: series.len(),
        });
    }
    Ok(series.iter().step_by(7).copied().collect())
}

/// Natural log, with non-positive (zero) readings replaced by `offset`.
pub fn log_precip_transform(values: &[f64], offset: f64) -> Result<Vec<f64>> {
    if !(offset > 0.0) || !offset.is_finite() {
        return Err(Error::invalid("precipitation offset must be positive"));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v < 0.0 {
                Err(Error::NegativeValue { index: i, value: v })
            } else if v > 0.0 {
                Ok(libm::log(v))
            } else {
                Ok(libm::log(offset))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooConfig {
    pub variant: PenaltyVariant,
    pub precip_offset: f64,
    pub lambda_grid: Vec<f64>,
    /// Covariate bandwidth; the mean-distance heuristic per fold when `None`.
    pub sigma: Option<f64>,
    pub sigma_prime: Option<f64>,
}

impl Default for LooConfig {
    fn default() -> Self {
        LooConfig {
            variant: PenaltyVariant::Standard,
            precip_offset: DEFAULT_PRECIP_OFFSET,
            lambda_grid: rkhs::default_lambda_grid(),
            sigma: None,
            sigma_prime: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub lambda: f64,
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub mse: f64,
    /// MSE of the mean log-precipitation curve of the training stations.
    pub baseline_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooFold {
    pub station_id: String,
    pub result: Result<FoldResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooReport {
    pub folds: Vec<LooFold>,
}

impl LooReport {
    fn ok(&self) -> impl Iterator<Item = &FoldResult> {
        self.folds.iter().filter_map(|f| f.result.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.folds.iter().filter(|f| f.result.is_err()).count()
    }

    pub fn mean_mse(&self) -> f64 {
        let v: Vec<f64> = self.ok().map(|f| f.mse).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn mean_baseline_mse(&self) -> f64 {
        let v: Vec<f64> = self.ok().map(|f| f.baseline_mse).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn fold(&self, station_id: &str) -> Option<&LooFold> {
        self.folds.iter().find(|f| f.station_id == station_id)
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn run_fold(
    temp: &CurveSet,
    precip: &CurveSet,
    held_out: usize,
    train_idx: &[usize],
    cfg: &LooConfig,
) -> Result<FoldResult> {
    let xs = temp.select(train_idx)?;
    let ys = precip.select(train_idx)?;
    let sigma = match cfg.sigma {
        Some(s) => s,
        None => kernel::default_sigma(&xs)?,
    };
    let sigma_prime = cfg
        .sigma_prime
        .unwrap_or_else(|| kernel::default_sigma_prime(xs.grid()));
    let curve = rkhs::gcv_select(&xs, &ys, sigma, sigma_prime, &cfg.lambda_grid, cfg.variant)?;
    let lambda = curve.selected_lambda();
    let params = RkhsParams {
        sigma,
        sigma_prime,
        lambda,
        variant: cfg.variant,
    };
    let model = rkhs::fit(&xs, &ys, &params)?;
    let predicted = model.predict(&temp.curve(held_out))?.into_values();
    let observed = precip.row(held_out).to_vec();
    let t = observed.len();
    let mut mean_curve = alloc::vec![0.0; t];
    for row in ys.rows() {
        for (m, v) in mean_curve.iter_mut().zip(row) {
            *m += v / ys.len() as f64;
        }
    }
    Ok(FoldResult {
        lambda,
        mse: mse(&predicted, &observed),
        baseline_mse: mse(&mean_curve, &observed),
        observed,
        predicted,
    })
}

/// Holds out each station in turn, fits temperature -> log precipitation on the
/// rest with GCV-selected lambda, and predicts the held-out curve.
///
/// Training stations are ordered by id inside every fold, so results do not
/// depend on the order of the input files.
pub fn leave_one_out(dataset: &WeatherDataset, cfg: &LooConfig) -> Result<LooReport> {
    if dataset.len() < 3 {
        return Err(Error::invalid(
            "leave-one-out needs at least three stations",
        ));
    }
    let (temp, precip) = dataset.curves(cfg.precip_offset)?;
    let mut by_id: Vec<usize> = (0..dataset.len()).collect();
    by_id.sort_by(|&a, &b| {
        dataset.stations[a]
            .station_id
            .cmp(&dataset.stations[b].station_id)
    });
    let folds = (0..dataset.len())
        .map(|i| {
            let train: Vec<usize> = by_id.iter().copied().filter(|&j| j != i).collect();
            LooFold {
                station_id: dataset.stations[i].station_id.clone(),
                result: run_fold(&temp, &precip, i, &train, cfg).map_err(|e| format!("{e}")),
            }
        })
        .collect();
    Ok(LooReport { folds })
}

/// Seeded synthetic stations whose precipitation depends on a latent climate
/// index that also sets the temperature level and seasonal amplitude.
pub fn synthetic_dataset(n_stations: usize, seed: u64) -> Result<WeatherDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let two_pi = 2.0 * core::f64::consts::PI;
    let stations = (0..n_stations)
        .map(|s| {
            let u: f64 = unit.sample(&mut rng);
            let level = -5.0 + 20.0 * u;
            let amplitude = 18.0 - 10.0 * u;
            let mut temp = Vec::with_capacity(DAYS);
            let mut precip = Vec::with_capacity(DAYS);
            for d in 0..DAYS {
                let phase = two_pi * d as f64 / DAYS as f64;
                let z: f64 = StandardNormal.sample(&mut rng);
                temp.push(level - amplitude * libm::cos(phase - 0.35) + 1.5 * z);
                let log_mean = -1.0 + 2.5 * u + (1.0 - u) * 0.8 * libm::cos(phase - 3.4);
                let z: f64 = StandardNormal.sample(&mut rng);
                let dry: f64 = unit.sample(&mut rng);
                precip.push(if dry < 0.25 {
                    0.0
                } else {
                    libm::exp(log_mean + 0.5 * z)
                });
            }
            StationSeries::new(format!("S{s:02}"), temp, precip)
        })
        .collect::<Result<Vec<_>>>()?;
    WeatherDataset::new(stations)
}
