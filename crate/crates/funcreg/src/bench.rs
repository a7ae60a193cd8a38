//! Replicates of the simulation study spread over a rayon pool.

use funcreg_core::sim::{aggregate, run_rep, BenchmarkReport, RepOutcome, SimConfig, SimModel};
use rayon::prelude::*;

use crate::error::{Context, Error, Result};

pub const THREADS_ENV: &str = "FUNCREG_THREADS";

/// Worker count from `FUNCREG_THREADS`; unset or `0` means all cores.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(Error::Input(format!("{THREADS_ENV}: {e}"))),
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::Input(format!(
                "{THREADS_ENV} must be a nonnegative integer, got `{v}`"
            ))
        }),
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))
}

/// Runs every rep of `config` and aggregates in rep order, so the report does
/// not depend on `threads`.
pub fn run_model(config: &SimConfig, threads: usize) -> Result<(BenchmarkReport, Vec<RepOutcome>)> {
    config
        .validate()
        .context(|| "invalid simulation settings".to_string())?;
    let outcomes = pool(threads)?.install(|| {
        (0..config.reps as u64)
            .into_par_iter()
            .map(|rep| run_rep(config, rep))
            .collect::<funcreg_core::Result<Vec<_>>>()
    });
    let outcomes = outcomes.context(|| format!("model {}", config.model.as_str()))?;
    Ok((aggregate(config.model, &outcomes), outcomes))
}

/// Per-model rep outcomes, in the order the models were run.
pub type ModelOutcomes = Vec<(SimModel, Vec<RepOutcome>)>;

/// Runs several models with otherwise identical settings.
pub fn run_models(
    base: &SimConfig,
    models: &[SimModel],
    threads: usize,
) -> Result<(BenchmarkReport, ModelOutcomes)> {
    let mut report = BenchmarkReport { rows: Vec::new() };
    let mut details = Vec::with_capacity(models.len());
    for &model in models {
        let cfg = SimConfig {
            model,
            ..base.clone()
        };
        let (r, outcomes) = run_model(&cfg, threads)?;
        report.extend(r);
        details.push((model, outcomes));
    }
    Ok((report, details))
}
