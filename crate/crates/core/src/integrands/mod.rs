//! Integrands on `[0,1]^d`, weight densities and the noisy query wrapper.

mod benchmark;
mod bump;
mod sensor;
mod weight;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use benchmark::Benchmark;
pub use bump::{
    calibration_constant, h0, make_bump_class, make_bump_class_with_signs,
    unit_bump_sobolev_sq, BumpClassSpec, SignGame, MAX_BUMPS,
};
pub use sensor::read_series;
pub use weight::{make_weight, WeightDensity, WeightSpec};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernel::{kernel_matrix, KernelSpec};
use crate::rng::StreamRng;

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Kernel expansion `f(x) = Σ aᵢ k(x̂ᵢ, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub kernel: KernelSpec,
    pub centers: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
}

impl Expansion {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.coeffs)
            .map(|(c, a)| a * self.kernel.eval_unchecked(c, x))
            .sum()
    }

    /// RKHS norm `√(aᵀKa)`.
    pub fn rkhs_norm(&self) -> Result<f64> {
        let k = kernel_matrix(&self.kernel, &self.centers)?;
        let n = self.coeffs.len();
        let mut q = 0.0;
        for i in 0..n {
            let row = k.row(i);
            q += self.coeffs[i] * row.iter().zip(&self.coeffs).map(|(k, a)| k * a).sum::<f64>();
        }
        Ok(q.max(0.0).sqrt())
    }
}

#[derive(Clone)]
enum Kind {
    Expansion(Arc<Expansion>),
    Benchmark(Benchmark),
    Bump(Arc<BumpClassSpec>),
    Constant(f64),
    Series(Arc<Vec<f64>>),
    Custom(CustomFn),
}

/// A deterministic function on `[0,1]^d`. `true_integral`, when known, is the
/// integral against the uniform weight.
#[derive(Clone)]
pub struct Integrand {
    dim: usize,
    kind: Kind,
    name: String,
    rkhs_norm_bound: Option<f64>,
    true_integral: Option<f64>,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("rkhs_norm_bound", &self.rkhs_norm_bound)
            .field("true_integral", &self.true_integral)
            .finish()
    }
}

impl Integrand {
    fn with_kind(dim: usize, kind: Kind, name: impl Into<String>) -> Self {
        Integrand {
            dim,
            kind,
            name: name.into(),
            rkhs_norm_bound: None,
            true_integral: None,
        }
    }

    /// Wraps an arbitrary deterministic function.
    pub fn custom<F>(dim: usize, name: &str, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        Ok(Self::with_kind(dim, Kind::Custom(Arc::new(f)), name))
    }

    /// Kernel expansion with explicit centers and coefficients.
    pub fn expansion(kernel: KernelSpec, centers: Vec<Vec<f64>>, coeffs: Vec<f64>, dim: usize) -> Result<Self> {
        kernel.validate()?;
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        check_dim(centers.len(), coeffs.len())?;
        for c in &centers {
            check_dim(dim, c.len())?;
            check_finite(c, "expansion center")?;
        }
        check_finite(&coeffs, "expansion coefficient")?;
        let e = Expansion {
            kernel,
            centers,
            coeffs,
        };
        let norm = e.rkhs_norm()?;
        let mut f = Self::with_kind(dim, Kind::Expansion(Arc::new(e)), "synthetic");
        f.rkhs_norm_bound = Some(norm);
        if f.as_expansion().unwrap().centers.is_empty() {
            f.true_integral = Some(0.0);
        }
        Ok(f)
    }

    pub fn with_true_integral(mut self, value: f64) -> Self {
        self.true_integral = Some(value);
        self
    }

    pub fn with_norm_bound(mut self, b: f64) -> Self {
        self.rkhs_norm_bound = Some(b);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rkhs_norm_bound(&self) -> Option<f64> {
        self.rkhs_norm_bound
    }

    pub fn true_integral(&self) -> Option<f64> {
        self.true_integral
    }

    pub fn as_expansion(&self) -> Option<&Expansion> {
        match &self.kind {
            Kind::Expansion(e) => Some(e),
            _ => None,
        }
    }

    pub fn as_bump(&self) -> Option<&BumpClassSpec> {
        match &self.kind {
            Kind::Bump(b) => Some(b),
            _ => None,
        }
    }

    pub fn series(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Series(s) => Some(s),
            _ => None,
        }
    }

    /// `f(x)` without dimension or finiteness checks.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Expansion(e) => e.eval(x),
            Kind::Benchmark(b) => b.eval_unit(x),
            Kind::Bump(b) => b.eval(x),
            Kind::Constant(c) => *c,
            Kind::Series(s) => {
                let n = s.len();
                let i = ((x[0] * n as f64).floor().max(0.0) as usize).min(n - 1);
                s[i]
            }
            Kind::Custom(f) => f(x),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        check_finite(x, "integrand query point")?;
        let v = self.value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("integrand value"))
        }
    }
}

/// Random kernel expansion with `m` centers uniform on `[0,1]^d` and
/// coefficients uniform on `[−1, 1]`.
pub fn make_synthetic<R: Rng + ?Sized>(
    d: usize,
    m: usize,
    kernel: KernelSpec,
    rng: &mut R,
) -> Result<Integrand> {
    let centers: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let coeffs: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Integrand::expansion(kernel, centers, coeffs, d)
}

pub fn make_benchmark(name: &str, d: usize) -> Result<Integrand> {
    let b: Benchmark = name.parse()?;
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    if let Some(fixed) = b.fixed_dim() {
        if fixed != d {
            return Err(Error::InvalidArgument(format!(
                "{b} is defined only for d = {fixed}"
            )));
        }
    }
    Ok(Integrand::with_kind(d, Kind::Benchmark(b), b.name()))
}

/// Wraps a bump class as an integrand with its exact integral and norm bound.
pub fn bump_integrand(spec: BumpClassSpec) -> Integrand {
    let dim = spec.dim;
    let truth = spec.true_integral();
    let norm = spec.norm_bound();
    let mut f = Integrand::with_kind(dim, Kind::Bump(Arc::new(spec)), "bump");
    f.true_integral = Some(truth);
    f.rkhs_norm_bound = Some(norm);
    f
}

pub fn make_constant(d: usize, c: f64) -> Result<Integrand> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    if !c.is_finite() {
        return Err(Error::NonFinite("constant"));
    }
    let mut f = Integrand::with_kind(d, Kind::Constant(c), "constant");
    f.true_integral = Some(c);
    Ok(f)
}

/// 1-D step function over `n` values: `x` maps to index `min(⌊xn⌋, n−1)`, so
/// each value owns a cell of width `1/n` and the integral is the mean.
pub fn series_integrand(values: Vec<f64>) -> Result<Integrand> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("series is empty".into()));
    }
    check_finite(&values, "series value")?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut f = Integrand::with_kind(1, Kind::Series(Arc::new(values)), "series");
    f.true_integral = Some(mean);
    Ok(f)
}

pub fn load_sensor_series(path: &Path) -> Result<Integrand> {
    let mut f = series_integrand(read_series(path)?)?;
    f.name = "sensor".into();
    Ok(f)
}

/// `y = f(x) + N(0, σ²)` with a private stream. One standard normal is drawn
/// per query even when `σ = 0`, so streams stay aligned across noise levels.
#[derive(Debug)]
pub struct NoisyOracle<'a> {
    integrand: &'a Integrand,
    sigma: f64,
    rng: StreamRng,
    queries: usize,
}

impl<'a> NoisyOracle<'a> {
    pub fn new(integrand: &'a Integrand, sigma: f64, rng: StreamRng) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(NoisyOracle {
            integrand,
            sigma,
            rng,
            queries: 0,
        })
    }

    pub fn integrand(&self) -> &'a Integrand {
        self.integrand
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.integrand.dim()
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn query(&mut self, x: &[f64]) -> Result<f64> {
        let f = self.integrand.eval(x)?;
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.queries += 1;
        Ok(f + self.sigma * z)
    }
}
