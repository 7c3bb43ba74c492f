//! Experiment runner: trials over strategies and noise levels, aggregation,
//! scaling-law fits and CSV/JSON output.

mod config;
mod report;

use std::time::Instant;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    ExperimentConfig, GpMode, GpSpec, IntegrandSpec, OutputSpec, StrategyEntry,
    DEFAULT_CHECKPOINTS,
};
pub use report::{
    aggregate, aggregate_rows, emit, fit_all, fit_scaling, read_error_csv, AggregateRow,
    ErrorRow, ExperimentReport, FitEntry, OutputFormat, ScalingFit,
};

use crate::error::{Error, Result};
use crate::gp::fit_hyperparams;
use crate::integrands::{
    bump_integrand, load_sensor_series, make_benchmark, make_bump_class, make_constant,
    make_synthetic, make_weight, Integrand, NoisyOracle, WeightDensity,
};
use crate::kernel::KernelSpec;
use crate::oracle::{self, OracleResult};
use crate::quadrature::{run_strategy, EstimateTrace, GpConfig, InitialDesign, StrategyKind};
use crate::rng::{label_key, stream, StreamRng};

/// Builds the integrand described by `spec`; random constructions draw from a
/// stream keyed by their own seed (or the root seed).
pub fn build_integrand(spec: &IntegrandSpec, root_seed: u64) -> Result<Integrand> {
    let seeded = |seed: Option<u64>, label: &str| -> StreamRng {
        StreamRng::seed_from_u64(crate::rng::child_seed(
            seed.unwrap_or(root_seed),
            &[label_key(label)],
        ))
    };
    match spec {
        IntegrandSpec::Synthetic {
            d,
            m,
            nu,
            lengthscale,
            scale,
            seed,
        } => {
            let kernel = KernelSpec::new(*nu, *lengthscale, *scale)?;
            let mut rng = seeded(*seed, "synthetic");
            make_synthetic(*d, m.unwrap_or(30 * d), kernel, &mut rng)
        }
        IntegrandSpec::Benchmark { name, d } => make_benchmark(name, *d),
        IntegrandSpec::Bump {
            d,
            nu,
            b,
            m_target,
            seed,
        } => {
            let mut rng = seeded(*seed, "bump");
            Ok(bump_integrand(make_bump_class(*d, *nu, *b, *m_target, &mut rng)?))
        }
        IntegrandSpec::Constant { d, value } => make_constant(*d, *value),
        IntegrandSpec::Sensor { path } => load_sensor_series(path),
    }
}

/// Reference value of `∫ f p`: exact when the integrand carries it and the
/// weight is uniform, otherwise from the oracle.
pub fn ground_truth(f: &Integrand, weight: &WeightDensity, cfg: &oracle::OracleConfig) -> Result<OracleResult> {
    if let (Some(v), true) = (f.true_integral(), weight.is_uniform()) {
        return Ok(OracleResult {
            value: v,
            err_estimate: 0.0,
            converged: true,
            evaluations: 0,
        });
    }
    let r = oracle::integrate(f, weight, cfg).map_err(|e| match e {
        Error::Oracle(m) => Error::Oracle(m),
        other => Error::Oracle(other.to_string()),
    })?;
    if !r.value.is_finite() {
        return Err(Error::Oracle("non-finite ground truth".into()));
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub strategy: String,
    pub sigma: f64,
    pub trial: usize,
    /// `(t, |Î_t − I|)`.
    pub errors: Vec<(usize, f64)>,
    pub final_error: f64,
    pub estimate: f64,
    /// Kernel used by the MVS batch, if any.
    pub kernel: Option<KernelSpec>,
    /// Strategy failure; such records carry no errors and are skipped by
    /// aggregation.
    pub failure: Option<String>,
    pub wall_time_s: f64,
}

impl TrialRecord {
    /// The record without its wall time, for comparisons across runs.
    pub fn without_timing(&self) -> TrialRecord {
        TrialRecord {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub truth: OracleResult,
    pub records: Vec<TrialRecord>,
}

/// Worker count: `BQ_WORKERS` if set and valid, else the configured value
/// (0 meaning every core).
pub fn resolve_workers(configured: usize) -> usize {
    std::env::var("BQ_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(configured)
}

// Stream keys. Strategies in one (σ, trial) cell share every stream, so
// different strategies see common random numbers and degenerate splits
// reproduce MC and MVS exactly.
fn cell_stream(root: u64, role: &str, sigma: f64, trial: usize) -> StreamRng {
    stream(root, &[label_key(role), sigma.to_bits(), trial as u64])
}

fn gp_for_trial(
    cfg: &ExperimentConfig,
    f: &Integrand,
    init: &InitialDesign,
    sigma: f64,
) -> Result<GpConfig> {
    let gp = &cfg.gp;
    let kernel = match gp.mode {
        GpMode::Fixed => KernelSpec::new(
            gp.nu,
            gp.lengthscale.ok_or_else(|| Error::Config("missing gp.lengthscale".into()))?,
            gp.scale.ok_or_else(|| Error::Config("missing gp.scale".into()))?,
        )?,
        GpMode::Integrand => {
            f.as_expansion()
                .ok_or_else(|| Error::Config("gp mode `integrand` needs a synthetic integrand".into()))?
                .kernel
        }
        GpMode::Fit => {
            let lambda = gp.lambda.unwrap_or_else(|| (sigma * sigma).max(1e-10));
            fit_hyperparams(&init.points, &init.observations, gp.nu, lambda, &gp.bounds)?
        }
    };
    Ok(GpConfig {
        kernel,
        lambda: gp.lambda,
    })
}

// One (σ, trial) cell: every strategy's trace (or error) and its wall time,
// in config order.
fn traces_for_cell(
    cfg: &ExperimentConfig,
    f: &Integrand,
    weight: &WeightDensity,
    sigma: f64,
    trial: usize,
) -> Vec<(Result<EstimateTrace>, f64)> {
    let checkpoints = cfg.checkpoint_times();
    let root = cfg.root_seed;
    let n_init = cfg
        .strategies
        .iter()
        .filter(|s| s.kind != StrategyKind::Mc)
        .map(|s| s.n_init)
        .max()
        .unwrap_or(0);
    let needs_gp = cfg.strategies.iter().any(|s| s.kind != StrategyKind::Mc);

    // Initial points depend on the trial only; their observations on (σ, trial).
    let design = if needs_gp {
        let mut point_rng = stream(root, &[label_key("init"), trial as u64]);
        NoisyOracle::new(f, sigma, cell_stream(root, "init-noise", sigma, trial))
            .and_then(|mut o| InitialDesign::draw(&mut o, weight, n_init, &mut point_rng))
            .and_then(|d| gp_for_trial(cfg, f, &d, sigma).map(|g| (d, g)))
    } else {
        Err(Error::Config("unused".into()))
    };

    cfg.strategies
        .iter()
        .map(|entry| {
            let start = Instant::now();
            let result = (|| {
                let mut oracle = NoisyOracle::new(f, sigma, cell_stream(root, "noise", sigma, trial))?;
                let mut rng = cell_stream(root, "sample", sigma, trial);
                let scfg = entry.to_config(cfg.t_max, checkpoints.clone());
                let (init, gp) = match (&design, entry.kind) {
                    (_, StrategyKind::Mc) => (None, None),
                    (Ok((d, g)), _) => (Some(d), Some(g)),
                    (Err(e), _) => return Err(Error::Config(e.to_string())),
                };
                run_strategy(&mut oracle, weight, &scfg, gp, init, &mut rng)
            })();
            (result, start.elapsed().as_secs_f64())
        })
        .collect()
}

fn run_cell(
    cfg: &ExperimentConfig,
    f: &Integrand,
    weight: &WeightDensity,
    truth: f64,
    sigma: f64,
    trial: usize,
) -> Vec<TrialRecord> {
    cfg.strategies
        .iter()
        .zip(traces_for_cell(cfg, f, weight, sigma, trial))
        .map(|(entry, (result, wall))| match result {
            Ok(tr) => TrialRecord {
                strategy: entry.label(),
                sigma,
                trial,
                errors: tr
                    .checkpoints
                    .iter()
                    .map(|&(t, v)| (t, (v - truth).abs()))
                    .collect(),
                final_error: (tr.estimate - truth).abs(),
                estimate: tr.estimate,
                kernel: tr.kernel,
                failure: None,
                wall_time_s: wall,
            },
            Err(e) => TrialRecord {
                strategy: entry.label(),
                sigma,
                trial,
                errors: Vec::new(),
                final_error: f64::NAN,
                estimate: f64::NAN,
                kernel: None,
                failure: Some(e.to_string()),
                wall_time_s: wall,
            },
        })
        .collect()
}

/// Full traces of one (σ, trial) cell, one per strategy in config order,
/// exactly as [`run_experiment`] produces them.
pub fn cell_traces(cfg: &ExperimentConfig, sigma: f64, trial: usize) -> Result<Vec<EstimateTrace>> {
    cfg.validate()?;
    let f = build_integrand(&cfg.integrand, cfg.root_seed)?;
    let weight = make_weight(&cfg.weight, f.dim())?;
    traces_for_cell(cfg, &f, &weight, sigma, trial)
        .into_iter()
        .map(|(r, _)| r)
        .collect()
}

/// Runs every (strategy, σ, trial) cell. Records are ordered by strategy,
/// then σ, then trial, independent of the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let f = build_integrand(&cfg.integrand, cfg.root_seed)?;
    let weight = make_weight(&cfg.weight, f.dim())?;
    let truth = ground_truth(&f, &weight, &cfg.oracle)?;

    let cells: Vec<(usize, usize)> = (0..cfg.sigmas.len())
        .flat_map(|s| (0..cfg.n_trials).map(move |t| (s, t)))
        .collect();
    let work = |&(s, t): &(usize, usize)| run_cell(cfg, &f, &weight, truth.value, cfg.sigmas[s], t);
    let workers = resolve_workers(cfg.workers);
    let per_cell: Vec<Vec<TrialRecord>> = if workers == 1 {
        cells.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(work).collect())
    };

    let mut records = Vec::with_capacity(cells.len() * cfg.strategies.len());
    for k in 0..cfg.strategies.len() {
        for cell in &per_cell {
            records.push(cell[k].clone());
        }
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        truth,
        records,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub split: f64,
    pub sigma: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitTable {
    pub rows: Vec<SplitRow>,
    pub output: ExperimentOutput,
}

/// Runs the two-batch estimator at each split `ρ` with all other settings
/// taken from the config's first `mvs-mc` strategy (or defaults). Labels are
/// `mvs-mc@ρ`.
pub fn split_sweep(cfg: &ExperimentConfig, splits: &[f64]) -> Result<SplitTable> {
    if splits.is_empty() || splits.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::Config("splits must be a nonempty list in [0, 1]".into()));
    }
    let template = cfg
        .strategies
        .iter()
        .find(|s| s.kind == StrategyKind::MvsMc)
        .cloned()
        .unwrap_or_else(|| StrategyEntry::new(StrategyKind::MvsMc));
    let mut sweep = cfg.clone();
    sweep.strategies = splits
        .iter()
        .map(|&rho| StrategyEntry {
            label: Some(format!("mvs-mc@{rho}")),
            split: rho,
            ..template.clone()
        })
        .collect();
    let output = run_experiment(&sweep)?;
    let mut rows = Vec::new();
    for (entry, &rho) in sweep.strategies.iter().zip(splits) {
        let label = entry.label();
        for &sigma in &cfg.sigmas {
            let errs: Vec<f64> = output
                .records
                .iter()
                .filter(|r| r.strategy == label && r.sigma == sigma && r.failure.is_none())
                .map(|r| r.final_error)
                .collect();
            let (mean, std) = report::mean_std(&errs);
            rows.push(SplitRow {
                split: rho,
                sigma,
                mean,
                std,
                n: errs.len(),
            });
        }
    }
    Ok(SplitTable { rows, output })
}
