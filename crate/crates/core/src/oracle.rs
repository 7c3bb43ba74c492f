//! Ground-truth integration, independent of the estimators under test.
//!
//! * `d = 1`: globally adaptive Gauss–Kronrod (7/15-point) bisection.
//! * `d = 2, 3`: tensor Gauss–Legendre at 32 and 48 nodes per axis panel;
//!   the difference is the error estimate.
//! * `d ≥ 4`: randomly shifted Kronecker QMC with the tent transform; the
//!   error estimate is the standard error over the randomizations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::integrands::{Integrand, WeightDensity};
use crate::qmc::Kronecker;
use crate::rng::StreamRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    /// Chosen from the dimension.
    #[default]
    Auto,
    Adaptive1d,
    TensorGauss,
    Qmc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub method: OracleMethod,
    pub abs_tol: f64,
    /// Evaluation budget for the adaptive and QMC methods.
    pub points_budget: usize,
    /// Gauss panels per axis for the tensor method; 0 picks a default.
    pub panels: usize,
    pub randomizations: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            method: OracleMethod::Auto,
            abs_tol: 1e-10,
            points_budget: 1_000_000,
            panels: 0,
            randomizations: 8,
            seed: 0x5eed,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::Config(format!("abs_tol must be > 0, got {}", self.abs_tol)));
        }
        match self.resolve(d) {
            OracleMethod::Adaptive1d if d != 1 => {
                Err(Error::Config("adaptive-1d needs d = 1".into()))
            }
            OracleMethod::TensorGauss if d > 3 => {
                Err(Error::Config("tensor-gauss supports d <= 3".into()))
            }
            OracleMethod::Qmc if self.points_budget < 10_000 || self.randomizations < 2 => {
                Err(Error::Config(
                    "qmc needs a budget >= 10^4 and >= 2 randomizations".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    fn resolve(&self, d: usize) -> OracleMethod {
        match self.method {
            OracleMethod::Auto => match d {
                1 => OracleMethod::Adaptive1d,
                2 | 3 => OracleMethod::TensorGauss,
                _ => OracleMethod::Qmc,
            },
            m => m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub err_estimate: f64,
    /// Whether `err_estimate <= abs_tol` was reached within budget.
    pub converged: bool,
    pub evaluations: usize,
}

/// `∫ f p` over `[0,1]^d`.
pub fn integrate(f: &Integrand, weight: &WeightDensity, cfg: &OracleConfig) -> Result<OracleResult> {
    check_dim(f.dim(), weight.dim())?;
    let d = f.dim();
    if weight.is_uniform() {
        integrate_box(&vec![0.0; d], &vec![1.0; d], &|x: &[f64]| f.value(x), cfg)
    } else {
        let g = |x: &[f64]| f.value(x) * weight.density(x);
        integrate_box(&vec![0.0; d], &vec![1.0; d], &g, cfg)
    }
}

/// `∫ f` over the box `[lo, hi]`.
pub fn integrate_box(
    lo: &[f64],
    hi: &[f64],
    f: &dyn Fn(&[f64]) -> f64,
    cfg: &OracleConfig,
) -> Result<OracleResult> {
    let d = lo.len();
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    check_dim(d, hi.len())?;
    if lo.iter().zip(hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
        return Err(Error::InvalidArgument("invalid integration box".into()));
    }
    cfg.validate(d)?;
    let res = match cfg.resolve(d) {
        OracleMethod::Adaptive1d => {
            let mut x = [0.0];
            adaptive_gk(
                |t| {
                    x[0] = t;
                    f(&x)
                },
                lo[0],
                hi[0],
                cfg.abs_tol,
                (cfg.points_budget / 15).max(1),
            )
        }
        OracleMethod::TensorGauss => {
            let panels = if cfg.panels > 0 {
                cfg.panels
            } else if d == 2 {
                8
            } else {
                3
            };
            tensor_gauss(lo, hi, f, panels, cfg.abs_tol)
        }
        OracleMethod::Qmc => qmc(lo, hi, f, cfg),
        OracleMethod::Auto => unreachable!(),
    };
    if res.value.is_finite() {
        Ok(res)
    } else {
        Err(Error::Oracle("integrand produced a non-finite value".into()))
    }
}

// Kronrod nodes and weights, kept at full published precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// `(Kronrod estimate, |Kronrod − Gauss|)` on `[a, b]`.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive 15-point Gauss–Kronrod on `[a, b]`: the interval with the
/// largest error estimate is bisected until the summed estimate is below
/// `abs_tol` or `max_intervals` is reached.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> OracleResult {
    if a == b {
        return OracleResult {
            value: 0.0,
            err_estimate: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    let (value, err) = gk15(&mut f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value, err });
    let mut total_err = err;
    let min_width = (b - a).abs() * 1e-14;
    while total_err > abs_tol && heap.len() < max_intervals {
        let top = heap.pop().expect("nonempty");
        if (top.b - top.a).abs() <= min_width || !top.err.is_finite() {
            heap.push(top);
            break;
        }
        let mid = 0.5 * (top.a + top.b);
        let (v1, e1) = gk15(&mut f, top.a, mid);
        let (v2, e2) = gk15(&mut f, mid, top.b);
        evaluations += 30;
        total_err += e1 + e2 - top.err;
        heap.push(Interval { a: top.a, b: mid, value: v1, err: e1 });
        heap.push(Interval { a: mid, b: top.b, value: v2, err: e2 });
    }
    // recompute sums to avoid drift from the running updates
    let mut items = heap.into_vec();
    items.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = items.iter().map(|i| i.value).sum();
    let err: f64 = items.iter().map(|i| i.err).sum();
    OracleResult {
        value,
        err_estimate: err,
        converged: err <= abs_tol,
        evaluations,
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn tensor_rule(lo: &[f64], hi: &[f64], f: &dyn Fn(&[f64]) -> f64, order: usize, panels: usize) -> f64 {
    let (gx, gw) = gauss_legendre(order);
    let d = lo.len();
    // per-axis composite nodes and weights
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .map(|j| {
            let h = (hi[j] - lo[j]) / panels as f64;
            let mut nodes = Vec::with_capacity(order * panels);
            let mut weights = Vec::with_capacity(order * panels);
            for p in 0..panels {
                let a = lo[j] + p as f64 * h;
                for (x, w) in gx.iter().zip(&gw) {
                    nodes.push(a + 0.5 * h * (x + 1.0));
                    weights.push(0.5 * h * w);
                }
            }
            (nodes, weights)
        })
        .collect();
    let n = order * panels;
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for j in 0..d {
            point[j] = axes[j].0[idx[j]];
            w *= axes[j].1[idx[j]];
        }
        total += w * f(&point);
        let mut j = 0;
        while j < d {
            idx[j] += 1;
            if idx[j] < n {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == d {
            break;
        }
    }
    total
}

fn tensor_gauss(lo: &[f64], hi: &[f64], f: &dyn Fn(&[f64]) -> f64, panels: usize, abs_tol: f64) -> OracleResult {
    let coarse = tensor_rule(lo, hi, f, 32, panels);
    let fine = tensor_rule(lo, hi, f, 48, panels);
    let err = (fine - coarse).abs();
    let d = lo.len() as u32;
    OracleResult {
        value: fine,
        err_estimate: err,
        converged: err <= abs_tol,
        evaluations: (32 * panels).pow(d) + (48 * panels).pow(d),
    }
}

fn qmc(lo: &[f64], hi: &[f64], f: &dyn Fn(&[f64]) -> f64, cfg: &OracleConfig) -> OracleResult {
    let d = lo.len();
    let r = cfg.randomizations;
    let per = cfg.points_budget / r;
    let volume: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let mut rng = StreamRng::seed_from_u64(cfg.seed);
    let mut u = vec![0.0; d];
    let mut x = vec![0.0; d];
    let estimates: Vec<f64> = (0..r)
        .map(|_| {
            let seq = Kronecker::randomized(d, &mut rng).with_baker();
            let mut sum = 0.0;
            for n in 0..per {
                seq.point_into(n, &mut u);
                for j in 0..d {
                    x[j] = lo[j] + (hi[j] - lo[j]) * u[j];
                }
                sum += f(&x);
            }
            volume * sum / per as f64
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / r as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
    let err = (var / r as f64).sqrt();
    OracleResult {
        value: mean,
        err_estimate: err,
        converged: err <= cfg.abs_tol,
        evaluations: per * r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize, f: &dyn Fn(&[f64]) -> f64, cfg: &OracleConfig) -> OracleResult {
        integrate_box(&vec![0.0; d], &vec![1.0; d], f, cfg).unwrap()
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        for n in [1usize, 2, 5, 32, 48] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
                assert!((got - want).abs() < 1e-12, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn one_dimensional() {
        let cfg = OracleConfig::default();
        let r = unit(1, &|x| x[0], &cfg);
        assert!((r.value - 0.5).abs() < 1e-10 && r.converged);
        let r = unit(1, &|x| (x[0] - 0.3).abs(), &cfg);
        assert!((r.value - 0.29).abs() < 1e-10 && r.converged);
        let r = unit(1, &|x| (40.0 * x[0]).sin(), &cfg);
        assert!((r.value - (1.0 - 40f64.cos()) / 40.0).abs() < 1e-10);
    }

    #[test]
    fn tensor_and_qmc() {
        let cfg = OracleConfig::default();
        let r = unit(2, &|_| 1.0, &cfg);
        assert!((r.value - 1.0).abs() < 1e-12);
        let poly = |x: &[f64]| x[0].powi(5) * x[1].powi(3) + x[2] * x[2];
        let r = unit(3, &poly, &cfg);
        assert!((r.value - (1.0 / 24.0 + 1.0 / 3.0)).abs() < 1e-12);
        let smooth = |x: &[f64]| (x[0] + 2.0 * x[1]).exp();
        let exact = (1f64.exp() - 1.0) * (2f64.exp() - 1.0) / 2.0;
        let t = unit(2, &smooth, &cfg);
        let q = unit(2, &smooth, &OracleConfig { method: OracleMethod::Qmc, ..cfg.clone() });
        assert!((t.value - exact).abs() < 1e-12);
        assert!((t.value - q.value).abs() <= 3.0 * (t.err_estimate + q.err_estimate) + 1e-12);
        let r = unit(5, &|x| x.iter().sum::<f64>(), &cfg);
        assert!((r.value - 2.5).abs() <= 4.0 * r.err_estimate + 1e-9 && r.err_estimate < 1e-5);
    }

    #[test]
    fn config_validation() {
        let bad = OracleConfig { abs_tol: 0.0, ..Default::default() };
        assert!(integrate_box(&[0.0], &[1.0], &|_| 1.0, &bad).is_err());
        let tg = OracleConfig { method: OracleMethod::TensorGauss, ..Default::default() };
        assert!(integrate_box(&[0.0; 4], &[1.0; 4], &|_| 1.0, &tg).is_err());
        let q = OracleConfig { method: OracleMethod::Qmc, points_budget: 100, ..Default::default() };
        assert!(integrate_box(&[0.0; 4], &[1.0; 4], &|_| 1.0, &q).is_err());
        assert!(integrate_box(&[0.0], &[1.0], &|_| f64::NAN, &OracleConfig::default()).is_err());
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let cfg = OracleConfig { points_budget: 150, ..Default::default() };
        let r = unit(1, &|x| if x[0] < 1.0 / 3.0 { 0.0 } else { 1.0 }, &cfg);
        assert!(!r.converged);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-2);
    }
}
