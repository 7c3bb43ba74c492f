use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// Weight density specification as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightSpec {
    #[default]
    Uniform,
    /// Isotropic Gaussian restricted to the unit cube.
    TruncatedGaussian { mean: f64, std: f64 },
}

#[derive(Clone, Debug, PartialEq)]
struct TruncatedAxis {
    mean: f64,
    std: f64,
    // probability mass of N(mean, std²) inside [0, 1]
    mass: f64,
    peak: f64,
}

impl TruncatedAxis {
    fn new(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !(std > 0.0) || !std.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "truncated gaussian needs finite mean and std > 0 (got {mean}, {std})"
            )));
        }
        let mass = normal_cdf((1.0 - mean) / std) - normal_cdf(-mean / std);
        if !(mass > 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "truncated gaussian with mean {mean}, std {std} has no mass on [0, 1]"
            )));
        }
        let mut axis = TruncatedAxis {
            mean,
            std,
            mass,
            peak: 0.0,
        };
        axis.peak = axis.density(mean.clamp(0.0, 1.0));
        Ok(axis)
    }

    fn density(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let z = (x - self.mean) / self.std;
        (-0.5 * z * z).exp() / (self.std * (2.0 * std::f64::consts::PI).sqrt() * self.mass)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.mass >= 0.25 {
            let normal = Normal::new(self.mean, self.std).expect("validated");
            loop {
                let x: f64 = normal.sample(rng);
                if (0.0..=1.0).contains(&x) {
                    return x;
                }
            }
        }
        loop {
            let x: f64 = rng.random();
            if rng.random::<f64>() * self.peak <= self.density(x) {
                return x;
            }
        }
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// A known bounded density `p` on `[0,1]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightDensity {
    dim: usize,
    axes: Option<Vec<TruncatedAxis>>,
    p_max: f64,
}

impl WeightDensity {
    pub fn uniform(dim: usize) -> Self {
        WeightDensity {
            dim,
            axes: None,
            p_max: 1.0,
        }
    }

    /// Product of per-axis Gaussians truncated to `[0, 1]`.
    pub fn truncated_gaussian(mean: &[f64], std: &[f64]) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        check_dim(mean.len(), std.len())?;
        let axes = mean
            .iter()
            .zip(std)
            .map(|(&m, &s)| TruncatedAxis::new(m, s))
            .collect::<Result<Vec<_>>>()?;
        let p_max = axes.iter().map(|a| a.peak).product();
        Ok(WeightDensity {
            dim: mean.len(),
            axes: Some(axes),
            p_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn is_uniform(&self) -> bool {
        self.axes.is_none()
    }

    /// `p(x)`; zero outside the cube.
    pub fn density(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return 0.0;
        }
        match &self.axes {
            None => 1.0,
            Some(axes) => axes.iter().zip(x).map(|(a, &v)| a.density(v)).product(),
        }
    }

    /// Checked form of [`density`](Self::density).
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        check_finite(x, "weight query point")?;
        Ok(self.density(x))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.axes {
            None => (0..self.dim).map(|_| rng.random::<f64>()).collect(),
            Some(axes) => axes.iter().map(|a| a.sample(rng)).collect(),
        }
    }
}

pub fn make_weight(spec: &WeightSpec, dim: usize) -> Result<WeightDensity> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    match *spec {
        WeightSpec::Uniform => Ok(WeightDensity::uniform(dim)),
        WeightSpec::TruncatedGaussian { mean, std } => {
            WeightDensity::truncated_gaussian(&vec![mean; dim], &vec![std; dim])
        }
    }
}
