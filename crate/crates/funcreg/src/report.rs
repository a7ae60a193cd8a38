//! CSV renderings of benchmark, GCV and leave-one-out results.

use std::fmt::Write as _;

use funcreg_core::sim::{BenchmarkReport, GcvComparison, RepOutcome, SimModel};
use funcreg_core::weather::LooReport;
use funcreg_core::GcvCurve;

use crate::io::fmt_f64;

fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        fmt_f64(v)
    }
}

/// `benchmark_report.csv`.
pub fn benchmark_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from(
        "model,estimator,mean_mse_clean,mean_mse_noisy,se,relative_to_rkhs,failures\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.model.as_str(),
            r.estimator.as_str(),
            num(r.mean_mse_clean),
            num(r.mean_mse_noisy),
            num(r.se),
            num(r.relative_to_rkhs),
            r.failures
        );
    }
    out
}

/// One line per (model, rep, estimator).
pub fn rep_detail_csv(per_model: &[(SimModel, Vec<RepOutcome>)]) -> String {
    let mut out = String::from("model,rep,estimator,mse_clean,mse_noisy,selected,error\n");
    for (model, outcomes) in per_model {
        for o in outcomes {
            for (est, cell) in &o.cells {
                let _ = match cell {
                    Ok(c) => writeln!(
                        out,
                        "{},{},{},{},{},{},",
                        model.as_str(),
                        o.rep,
                        est.as_str(),
                        num(c.mse_clean),
                        num(c.mse_noisy),
                        num(c.selected)
                    ),
                    Err(e) => writeln!(
                        out,
                        "{},{},{},NA,NA,NA,{}",
                        model.as_str(),
                        o.rep,
                        est.as_str(),
                        quote(e)
                    ),
                };
            }
        }
    }
    out
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
}

/// `gcv.csv`: `lambda,gcv` plus `validation_mse` when available.
pub fn gcv_csv(gcv: &GcvCurve, validation: Option<&GcvCurve>) -> String {
    let mut out = String::from("lambda,gcv");
    if validation.is_some() {
        out.push_str(",validation_mse");
    }
    out.push('\n');
    for (i, (l, s)) in gcv.lambdas.iter().zip(&gcv.scores).enumerate() {
        out.push_str(&fmt_f64(*l));
        out.push(',');
        out.push_str(&score(*s));
        if let Some(v) = validation {
            out.push(',');
            out.push_str(&score(v.scores[i]));
        }
        out.push('\n');
    }
    out
}

fn score(v: f64) -> String {
    if v.is_finite() {
        fmt_f64(v)
    } else {
        "NA".to_string()
    }
}

/// GCV and validation curves of one simulated replicate.
pub fn comparison_csv(c: &GcvComparison) -> String {
    let mut out = String::from("lambda,gcv,validation_mse\n");
    for ((l, g), v) in c
        .lambdas
        .iter()
        .zip(&c.gcv_scores)
        .zip(&c.validation_scores)
    {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*l), score(*g), score(*v));
    }
    out
}

/// `loo_summary.csv`; failed folds carry `NA`.
pub fn loo_summary_csv(report: &LooReport) -> String {
    let mut out = String::from("station,lambda_selected,mse\n");
    for f in &report.folds {
        let _ = match &f.result {
            Ok(r) => writeln!(
                out,
                "{},{},{}",
                quote_id(&f.station_id),
                fmt_f64(r.lambda),
                fmt_f64(r.mse)
            ),
            Err(_) => writeln!(out, "{},NA,NA", quote_id(&f.station_id)),
        };
    }
    out
}

fn quote_id(id: &str) -> String {
    if id.contains([',', '"', '\n']) {
        quote(id)
    } else {
        id.to_string()
    }
}

/// `predictions_<station>.csv` for one fold.
pub fn prediction_csv(grid: &[f64], observed: &[f64], predicted: &[f64]) -> String {
    let mut out = String::from("t,observed_log_precip,predicted_log_precip\n");
    for ((t, o), p) in grid.iter().zip(observed).zip(predicted) {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(*o), fmt_f64(*p));
    }
    out
}

/// File-name-safe form of a station id.
pub fn station_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcv_table_shapes() {
        let g = GcvCurve {
            lambdas: vec![0.1, 1.0],
            scores: vec![2.0, f64::INFINITY],
            argmin_index: 0,
        };
        assert_eq!(gcv_csv(&g, None), "lambda,gcv\n0.1,2\n1,NA\n");
        let v = GcvCurve {
            scores: vec![0.5, 0.25],
            ..g.clone()
        };
        assert_eq!(
            gcv_csv(&g, Some(&v)),
            "lambda,gcv,validation_mse\n0.1,2,0.5\n1,NA,0.25\n"
        );
    }

    #[test]
    fn station_names_are_sanitised() {
        assert_eq!(station_file_stem("St. John's/NF"), "St._John_s_NF");
        assert_eq!(quote_id("a,b"), "\"a,b\"");
    }
}
