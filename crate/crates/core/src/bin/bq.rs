use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bq_core::harness::{
    aggregate, aggregate_rows, build_integrand, emit, fit_all, ground_truth, read_error_csv,
    run_experiment, split_sweep, ExperimentConfig, ExperimentOutput, FitEntry, IntegrandSpec,
    OutputFormat,
};
use bq_core::integrands::{make_weight, WeightSpec};
use bq_core::oracle::OracleConfig;
use bq_core::Error;

#[derive(Parser)]
#[command(name = "bq", version, about = "Noisy Bayesian quadrature experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Per-checkpoint error CSV (overrides the config).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// JSON summary (overrides the config).
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Final error of the two-batch estimator across MVS fractions.
    SweepSplits {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        splits: Vec<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fit log-log slopes to an error CSV written by `run`.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 16)]
        t_min_cut: usize,
    },
    /// Ground-truth integral of an integrand against the uniform weight.
    Oracle {
        /// e.g. `benchmark:ackley:2`, `constant:0.3:1`, `synthetic:1:0.03:7`,
        /// `bump:1:16:3`, `sensor:data.csv`
        #[arg(long)]
        integrand: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Oracle(_) => 2,
        _ => 1,
    }
}

fn print_fits(fits: &[FitEntry]) {
    println!("{:<16} {:>10} {:>9} {:>7} {:>10}", "strategy", "sigma", "slope", "r2", "T range");
    for f in fits {
        match &f.fit {
            Some(fit) => println!(
                "{:<16} {:>10.3e} {:>9.3} {:>7.3} {:>4}..{:<5}{}",
                f.strategy,
                f.sigma,
                fit.slope,
                fit.r2,
                fit.t_min,
                fit.t_max,
                if fit.flagged { " (zero errors dropped)" } else { "" }
            ),
            None => println!(
                "{:<16} {:>10.3e}  no fit: {}",
                f.strategy,
                f.sigma,
                f.error.as_deref().unwrap_or("")
            ),
        }
    }
}

fn write_outputs(out: &ExperimentOutput, fits: &[FitEntry], csv: Option<&Path>, json: Option<&Path>) -> Result<(), Error> {
    if let Some(p) = csv {
        emit(out, fits, OutputFormat::Csv, p)?;
        eprintln!("wrote {}", p.display());
    }
    if let Some(p) = json {
        emit(out, fits, OutputFormat::Json, p)?;
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn load(config: &Path, workers: Option<usize>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(config)?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            csv,
            json,
            workers,
        } => {
            let cfg = load(&config, workers)?;
            let out = run_experiment(&cfg)?;
            eprintln!(
                "ground truth {:.12e} (err estimate {:.2e})",
                out.truth.value, out.truth.err_estimate
            );
            let failures = out.records.iter().filter(|r| r.failure.is_some()).count();
            if failures > 0 {
                eprintln!("{failures} trial(s) failed and were skipped");
            }
            let agg = aggregate(&out.records);
            let fits = fit_all(&agg, cfg.t_min_cut);
            println!("{:<16} {:>10} {:>6} {:>13} {:>13}", "strategy", "sigma", "t", "mean", "std");
            for r in &agg {
                println!(
                    "{:<16} {:>10.3e} {:>6} {:>13.6e} {:>13.6e}",
                    r.strategy, r.sigma, r.t, r.mean, r.std
                );
            }
            println!();
            print_fits(&fits);
            write_outputs(
                &out,
                &fits,
                csv.as_deref().or(cfg.output.csv.as_deref()),
                json.as_deref().or(cfg.output.json.as_deref()),
            )
        }
        Command::SweepSplits {
            config,
            splits,
            csv,
            workers,
        } => {
            let cfg = load(&config, workers)?;
            let table = split_sweep(&cfg, &splits)?;
            println!("{:>6} {:>10} {:>13} {:>13}", "split", "sigma", "mean", "std");
            for r in &table.rows {
                println!("{:>6} {:>10.3e} {:>13.6e} {:>13.6e}", r.split, r.sigma, r.mean, r.std);
            }
            write_outputs(&table.output, &[], csv.as_deref(), None)
        }
        Command::Fit { input, t_min_cut } => {
            let rows = read_error_csv(&input)?;
            let agg = aggregate_rows(&rows);
            print_fits(&fit_all(&agg, t_min_cut));
            Ok(())
        }
        Command::Oracle { integrand, seed } => {
            let spec = IntegrandSpec::parse_inline(&integrand)?;
            let f = build_integrand(&spec, seed)?;
            let w = make_weight(&WeightSpec::Uniform, f.dim())?;
            let r = ground_truth(&f, &w, &OracleConfig::default())?;
            println!(
                "{:.16e} err_estimate={:.3e} converged={}",
                r.value, r.err_estimate, r.converged
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
