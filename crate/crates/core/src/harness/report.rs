use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentOutput, TrialRecord};
use crate::error::{Error, Result};
use crate::oracle::OracleResult;

/// One CSV row: the error of one trial at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub strategy: String,
    pub sigma: f64,
    pub trial: usize,
    pub t: usize,
    pub abs_error: f64,
}

impl TrialRecord {
    pub fn rows(&self) -> impl Iterator<Item = ErrorRow> + '_ {
        self.errors.iter().map(move |&(t, e)| ErrorRow {
            strategy: self.strategy.clone(),
            sigma: self.sigma,
            trial: self.trial,
            t,
            abs_error: e,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: String,
    pub sigma: f64,
    pub t: usize,
    pub mean: f64,
    /// Sample standard deviation (zero for a single trial).
    pub std: f64,
    pub n: usize,
}

pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample standard deviation per (strategy, σ, t), ordered by
/// strategy name, then σ, then t. Trials within a cell are summed in trial
/// order, so the result does not depend on row order.
pub fn aggregate_rows<'a>(rows: impl IntoIterator<Item = &'a ErrorRow>) -> Vec<AggregateRow> {
    let mut rows: Vec<&ErrorRow> = rows.into_iter().collect();
    rows.sort_by(|a, b| {
        a.strategy
            .cmp(&b.strategy)
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.t.cmp(&b.t))
            .then(a.trial.cmp(&b.trial))
    });
    let mut out = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j < rows.len()
            && rows[j].strategy == rows[i].strategy
            && rows[j].sigma == rows[i].sigma
            && rows[j].t == rows[i].t
        {
            j += 1;
        }
        let errs: Vec<f64> = rows[i..j].iter().map(|r| r.abs_error).collect();
        let (mean, std) = mean_std(&errs);
        out.push(AggregateRow {
            strategy: rows[i].strategy.clone(),
            sigma: rows[i].sigma,
            t: rows[i].t,
            mean,
            std,
            n: errs.len(),
        });
        i = j;
    }
    out
}

/// Aggregates the checkpoint errors of successful trials.
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRow> {
    let rows: Vec<ErrorRow> = records
        .iter()
        .filter(|r| r.failure.is_none())
        .flat_map(|r| r.rows())
        .collect();
    aggregate_rows(&rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub t_min: usize,
    pub t_max: usize,
    pub n_points: usize,
    /// Some checkpoints had zero mean error and were left out.
    pub flagged: bool,
}

/// Least squares of `log₂(mean error)` on `log₂ t` over checkpoints with
/// `t ≥ t_min_cut`. Rows must belong to one (strategy, σ) cell.
pub fn fit_scaling(rows: &[AggregateRow], t_min_cut: usize) -> Result<ScalingFit> {
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.strategy != first.strategy || r.sigma != first.sigma) {
            return Err(Error::InvalidArgument(
                "rows span more than one (strategy, sigma) cell".into(),
            ));
        }
    }
    let kept: Vec<&AggregateRow> = rows.iter().filter(|r| r.t >= t_min_cut).collect();
    let pts: Vec<(f64, f64)> = kept
        .iter()
        .filter(|r| r.mean > 0.0 && r.mean.is_finite())
        .map(|r| ((r.t as f64).log2(), r.mean.log2()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need >= 4 usable checkpoints at t >= {t_min_cut}, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("checkpoints must differ".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ScalingFit {
        slope,
        intercept,
        r2,
        t_min: kept.iter().map(|r| r.t).min().unwrap_or(0),
        t_max: kept.iter().map(|r| r.t).max().unwrap_or(0),
        n_points: pts.len(),
        flagged: pts.len() < kept.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub strategy: String,
    pub sigma: f64,
    pub fit: Option<ScalingFit>,
    pub error: Option<String>,
}

/// Fits every (strategy, σ) cell of an aggregate.
pub fn fit_all(agg: &[AggregateRow], t_min_cut: usize) -> Vec<FitEntry> {
    let mut out: Vec<FitEntry> = Vec::new();
    let mut i = 0;
    while i < agg.len() {
        let mut j = i;
        while j < agg.len() && agg[j].strategy == agg[i].strategy && agg[j].sigma == agg[i].sigma {
            j += 1;
        }
        let (fit, error) = match fit_scaling(&agg[i..j], t_min_cut) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        out.push(FitEntry {
            strategy: agg[i].strategy.clone(),
            sigma: agg[i].sigma,
            fit,
            error,
        });
        i = j;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// JSON summary: the configuration, ground truth, aggregates and fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub root_seed: u64,
    pub truth: OracleResult,
    pub aggregates: Vec<AggregateRow>,
    pub fits: Vec<FitEntry>,
    pub failures: usize,
}

impl ExperimentReport {
    pub fn new(output: &ExperimentOutput, fits: Vec<FitEntry>) -> Self {
        ExperimentReport {
            config: output.config.clone(),
            root_seed: output.config.root_seed,
            truth: output.truth,
            aggregates: aggregate(&output.records),
            fits,
            failures: output.records.iter().filter(|r| r.failure.is_some()).count(),
        }
    }
}

/// Writes the per-checkpoint CSV (`strategy,sigma,trial,t,abs_error`, floats
/// with 17 significant digits) or the JSON report.
pub fn emit(output: &ExperimentOutput, fits: &[FitEntry], format: OutputFormat, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Csv => {
            writeln!(w, "strategy,sigma,trial,t,abs_error")?;
            for rec in output.records.iter().filter(|r| r.failure.is_none()) {
                for row in rec.rows() {
                    writeln!(
                        w,
                        "{},{:.16e},{},{},{:.16e}",
                        csv_field(&row.strategy),
                        row.sigma,
                        row.trial,
                        row.t,
                        row.abs_error
                    )?;
                }
            }
        }
        OutputFormat::Json => {
            let report = ExperimentReport::new(output, fits.to_vec());
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Reads a CSV written by [`emit`].
pub fn read_error_csv(path: &Path) -> Result<Vec<ErrorRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: &str, trial: usize, t: usize, e: f64) -> ErrorRow {
        ErrorRow {
            strategy: strategy.into(),
            sigma: 0.1,
            trial,
            t,
            abs_error: e,
        }
    }

    #[test]
    fn aggregate_arithmetic() {
        let rows = vec![row("mc", 0, 4, 1.0), row("mc", 1, 4, 3.0)];
        let a = aggregate_rows(&rows);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].mean, 2.0);
        assert!((a[0].std - 2f64.sqrt()).abs() < 1e-15);
        let single = aggregate_rows(&rows[..1]);
        assert_eq!(single[0].std, 0.0);
    }

    #[test]
    fn aggregate_order_invariant() {
        let mut rows = vec![
            row("mvs", 0, 8, 0.5),
            row("mc", 0, 4, 1.0),
            row("mc", 1, 4, 3.0),
            row("mvs", 1, 8, 0.25),
            row("mc", 2, 4, 0.1),
        ];
        let a = aggregate_rows(&rows);
        rows.reverse();
        assert_eq!(a, aggregate_rows(&rows));
    }

    #[test]
    fn exact_power_law() {
        let agg: Vec<AggregateRow> = [4usize, 16, 32, 64, 128, 256]
            .iter()
            .map(|&t| AggregateRow {
                strategy: "mc".into(),
                sigma: 0.1,
                t,
                mean: 3.0 * (t as f64).powf(-0.5),
                std: 0.0,
                n: 1,
            })
            .collect();
        let fit = fit_scaling(&agg, 16).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!((fit.t_min, fit.t_max, fit.n_points), (16, 256, 5));
        assert!(fit_scaling(&agg, 64).is_err());
        let mut zeroed = agg.clone();
        zeroed[5].mean = 0.0;
        zeroed.push(AggregateRow { t: 512, mean: 3.0 / 512f64.sqrt(), ..agg[0].clone() });
        let f = fit_scaling(&zeroed, 16).unwrap();
        assert!(f.flagged);
    }
}
