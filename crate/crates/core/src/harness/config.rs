use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::FitBounds;
use crate::integrands::WeightSpec;
use crate::oracle::OracleConfig;
use crate::quadrature::{StrategyConfig, StrategyKind};

pub const DEFAULT_CHECKPOINTS: [usize; 7] = [4, 8, 16, 32, 64, 125, 250];

fn default_nu() -> f64 {
    1.5
}
fn default_scale() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IntegrandSpec {
    /// Random kernel expansion with `m` centers (default `30·d`).
    Synthetic {
        d: usize,
        #[serde(default)]
        m: Option<usize>,
        #[serde(default = "default_nu")]
        nu: f64,
        lengthscale: f64,
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    Benchmark {
        name: String,
        d: usize,
    },
    Bump {
        d: usize,
        #[serde(default = "default_nu")]
        nu: f64,
        b: f64,
        m_target: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Constant {
        d: usize,
        value: f64,
    },
    Sensor {
        path: PathBuf,
    },
}

impl IntegrandSpec {
    /// Parses the compact command-line form, e.g. `benchmark:ackley:2`,
    /// `constant:0.3:1`, `synthetic:1:0.03`, `bump:1:16`, `sensor:data.csv`.
    pub fn parse_inline(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("cannot parse integrand `{s}`"));
        let num = |i: usize| -> Result<f64> { parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad()) };
        let int = |i: usize| -> Result<usize> { parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad()) };
        let opt_seed = |i: usize| -> Result<Option<u64>> {
            parts.get(i).map(|v| v.parse().map_err(|_| bad())).transpose()
        };
        Ok(match parts[0] {
            "benchmark" => IntegrandSpec::Benchmark {
                name: parts.get(1).ok_or_else(bad)?.to_string(),
                d: int(2)?,
            },
            "constant" => IntegrandSpec::Constant {
                value: num(1)?,
                d: int(2)?,
            },
            "synthetic" => IntegrandSpec::Synthetic {
                d: int(1)?,
                m: None,
                nu: default_nu(),
                lengthscale: num(2)?,
                scale: default_scale(),
                seed: opt_seed(3)?,
            },
            "bump" => IntegrandSpec::Bump {
                d: int(1)?,
                nu: default_nu(),
                b: 1.0,
                m_target: int(2)?,
                seed: opt_seed(3)?,
            },
            "sensor" => IntegrandSpec::Sensor {
                path: PathBuf::from(parts[1..].join(":")),
            },
            _ => return Err(bad()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GpMode {
    /// Use `lengthscale` and `scale` as given.
    #[default]
    Fixed,
    /// Maximize the marginal likelihood on each trial's initial design.
    Fit,
    /// Use the synthetic integrand's own kernel.
    Integrand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpSpec {
    #[serde(default)]
    pub mode: GpMode,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub lengthscale: Option<f64>,
    #[serde(default)]
    pub scale: Option<f64>,
    /// Regularizer; defaults to `max(σ², 1e−10·scale)`.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub bounds: FitBounds,
}

impl Default for GpSpec {
    fn default() -> Self {
        GpSpec {
            mode: GpMode::Fit,
            nu: default_nu(),
            lengthscale: None,
            scale: None,
            lambda: None,
            bounds: FitBounds::default(),
        }
    }
}

fn default_split() -> f64 {
    0.5
}
fn default_gamma() -> f64 {
    1.0
}
fn default_n_init() -> usize {
    3
}

/// One strategy of an experiment; the budget comes from `t_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyEntry {
    pub kind: StrategyKind,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default = "default_split")]
    pub split: f64,
    #[serde(default)]
    pub interleave: bool,
    #[serde(default)]
    pub candidate_count: Option<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
}

impl StrategyEntry {
    pub fn new(kind: StrategyKind) -> Self {
        StrategyEntry {
            kind,
            label: None,
            split: default_split(),
            interleave: false,
            candidate_count: None,
            gamma: default_gamma(),
            n_init: default_n_init(),
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn to_config(&self, budget: usize, checkpoints: Vec<usize>) -> StrategyConfig {
        StrategyConfig {
            kind: self.kind,
            budget,
            split: self.split,
            interleave: self.interleave,
            candidate_count: self.candidate_count,
            gamma: self.gamma,
            n_init: self.n_init,
            checkpoints,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

fn default_trials() -> usize {
    100
}
fn default_t_max() -> usize {
    250
}
fn default_cut() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub integrand: IntegrandSpec,
    #[serde(default)]
    pub weight: WeightSpec,
    #[serde(default)]
    pub gp: GpSpec,
    pub strategies: Vec<StrategyEntry>,
    pub sigmas: Vec<f64>,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    /// Defaults to the standard checkpoints up to `t_max`, plus `t_max`.
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub root_seed: u64,
    /// Worker threads; 0 uses every core. `BQ_WORKERS` overrides.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_cut")]
    pub t_min_cut: usize,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn new(integrand: IntegrandSpec, strategies: Vec<StrategyEntry>, sigmas: Vec<f64>) -> Self {
        ExperimentConfig {
            name: None,
            integrand,
            weight: WeightSpec::Uniform,
            gp: GpSpec::default(),
            strategies,
            sigmas,
            t_max: default_t_max(),
            checkpoints: None,
            n_trials: default_trials(),
            root_seed: 0,
            workers: 0,
            t_min_cut: default_cut(),
            oracle: OracleConfig::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative sensor paths are resolved against the config file
        if let IntegrandSpec::Sensor { path: p } = &mut cfg.integrand {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn checkpoint_times(&self) -> Vec<usize> {
        let mut c = match &self.checkpoints {
            Some(c) => c.clone(),
            None => DEFAULT_CHECKPOINTS
                .iter()
                .copied()
                .filter(|&t| t <= self.t_max)
                .collect(),
        };
        c.push(self.t_max);
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::Config("t_max must be >= 1".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be >= 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config("sigmas must be a nonempty list of values >= 0".into()));
        }
        if let Some(c) = &self.checkpoints {
            if c.iter().any(|&t| t == 0 || t > self.t_max) {
                return Err(Error::Config(format!(
                    "checkpoints must lie in [1, {}]",
                    self.t_max
                )));
            }
        }
        for s in &self.strategies {
            s.to_config(self.t_max, Vec::new()).validate()?;
            if s.kind != StrategyKind::Mc && self.gp.mode == GpMode::Fit && s.n_init < 3 {
                return Err(Error::Config(
                    "hyperparameter fitting needs n_init >= 3".into(),
                ));
            }
        }
        let mut labels: Vec<String> = self.strategies.iter().map(|s| s.label()).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("strategy labels must be unique".into()));
        }
        if self.gp.mode == GpMode::Fixed
            && self.strategies.iter().any(|s| s.kind != StrategyKind::Mc)
            && (self.gp.lengthscale.is_none() || self.gp.scale.is_none())
        {
            return Err(Error::Config(
                "gp mode `fixed` needs lengthscale and scale".into(),
            ));
        }
        Ok(())
    }
}
