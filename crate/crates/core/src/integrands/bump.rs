//! Sums of sign-flipped, disjointly supported bumps on a regular grid, and the
//! equivalent discrete sign game.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{self, OracleConfig};

/// Largest accepted bump count.
pub const MAX_BUMPS: usize = 1_000_000;

/// `h₀(x) = exp(−1/(1 − ‖x‖²))` inside the unit ball, zero outside.
pub fn h0(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// The unit-height bump of diameter one centred at the origin:
/// `ĝ(u) = h₀(2u)/h₀(0)`.
#[inline]
fn unit_bump(u: &[f64]) -> f64 {
    let r2: f64 = u.iter().map(|v| 4.0 * v * v).sum();
    h0(r2) * std::f64::consts::E
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpClassSpec {
    pub dim: usize,
    pub nu: f64,
    /// Target norm bound `B`.
    pub b: f64,
    /// Bumps per axis.
    pub per_axis: usize,
    /// Bump diameter (grid step).
    pub w: f64,
    /// Bump count `per_axis^d`.
    pub m: usize,
    /// Bump height.
    pub eps: f64,
    /// `1/‖ĝ‖` for the unit bump in the Sobolev norm used for calibration.
    pub c0: f64,
    pub signs: Vec<i8>,
    /// Integral of one bump of height `eps`.
    pub i0: f64,
    pub i0_err: f64,
}

impl BumpClassSpec {
    /// Smoothness `s = ν + d/2`.
    pub fn s(&self) -> f64 {
        self.nu + self.dim as f64 / 2.0
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        let mut rest = index;
        let mut c = vec![0.0; self.dim];
        for j in (0..self.dim).rev() {
            c[j] = ((rest % self.per_axis) as f64 + 0.5) * self.w;
            rest /= self.per_axis;
        }
        c
    }

    fn cell(&self, x: &[f64]) -> usize {
        x.iter().fold(0, |acc, &v| {
            let k = ((v * self.per_axis as f64).floor().max(0.0) as usize).min(self.per_axis - 1);
            acc * self.per_axis + k
        })
    }

    /// The `i`-th bump `g_i` with unit sign.
    pub fn bump(&self, index: usize, x: &[f64]) -> f64 {
        let c = self.center(index);
        let u: Vec<f64> = x.iter().zip(&c).map(|(v, c)| (v - c) / self.w).collect();
        self.eps * unit_bump(&u)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let i = self.cell(x);
        self.signs[i] as f64 * self.bump(i, x)
    }

    /// `I0 · Σ δᵢ`.
    pub fn true_integral(&self) -> f64 {
        self.i0 * self.signs.iter().map(|&s| s as f64).sum::<f64>()
    }

    /// Upper bound on the Sobolev norm of `f` obtained from the single-bump
    /// norm and the disjoint-support scaling. Equals `B` by construction.
    pub fn norm_bound(&self) -> f64 {
        self.eps * self.w.powf(-self.s()) / self.c0
    }
}

/// Squared `H^k` norm (Fourier weight `(1+|ξ|²)^k`) of the unit bump, from
/// finite-difference derivatives on a grid:
/// `Σ_{|β|≤k} k!/((k−|β|)! β!) ‖∂^β ĝ‖²`.
pub fn unit_bump_sobolev_sq(k: usize, d: usize, n: usize) -> f64 {
    let pad = k + 1;
    let len = n + 2 * pad;
    let h = 1.0 / (n - 1) as f64;
    let total = len.pow(d as u32);
    let mut grid = vec![0.0; total];
    let mut u = vec![0.0; d];
    for (idx, g) in grid.iter_mut().enumerate() {
        let mut rest = idx;
        for j in (0..d).rev() {
            u[j] = -0.5 + ((rest % len) as f64 - pad as f64) * h;
            rest /= len;
        }
        *g = unit_bump(&u);
    }
    let strides: Vec<usize> = (0..d).map(|j| len.pow((d - 1 - j) as u32)).collect();

    let factorial = |m: usize| (1..=m).map(|v| v as f64).product::<f64>();
    let mut total_sq = 0.0;
    let mut beta = vec![0usize; d];
    loop {
        let order: usize = beta.iter().sum();
        if order <= k {
            let mut field = grid.clone();
            for (axis, &b) in beta.iter().enumerate() {
                let mut left = b;
                if left % 2 == 1 {
                    field = difference(&field, strides[axis], h, false);
                    left -= 1;
                }
                for _ in 0..left / 2 {
                    field = difference(&field, strides[axis], h, true);
                }
            }
            let sq: f64 = field.iter().map(|v| v * v).sum::<f64>() * h.powi(d as i32);
            let coef = factorial(k)
                / (factorial(k - order) * beta.iter().map(|&b| factorial(b)).product::<f64>());
            total_sq += coef * sq;
        }
        // next multi-index in [0, k]^d
        let mut j = 0;
        while j < d {
            beta[j] += 1;
            if beta[j] <= k {
                break;
            }
            beta[j] = 0;
            j += 1;
        }
        if j == d {
            break;
        }
    }
    total_sq
}

// Central first (`second == false`) or second difference along one stride.
// Values within one stride of the array ends are left at zero; the padding
// keeps the support well inside.
fn difference(f: &[f64], stride: usize, h: f64, second: bool) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for i in stride..f.len().saturating_sub(stride) {
        out[i] = if second {
            (f[i + stride] - 2.0 * f[i] + f[i - stride]) / (h * h)
        } else {
            (f[i + stride] - f[i - stride]) / (2.0 * h)
        };
    }
    out
}

fn grid_size(d: usize) -> usize {
    match d {
        1 => 8001,
        2 => 801,
        3 => 161,
        _ => (2.0e7f64.powf(1.0 / d as f64) as usize).max(9),
    }
}

/// Calibration constant `c₀ = 1/‖ĝ‖_{H^⌈s⌉}`, cached per `(⌈s⌉, d)`.
pub fn calibration_constant(nu: f64, d: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    let k = (nu + d as f64 / 2.0 - 1e-12).ceil() as usize;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().unwrap().get(&(k, d)) {
        return c;
    }
    // finite differences converge from below at second order; the 2% margin
    // covers the remaining discretization error
    let c = 1.0 / (1.02 * unit_bump_sobolev_sq(k, d, grid_size(d)).sqrt());
    cache.lock().unwrap().insert((k, d), c);
    c
}

fn build(d: usize, nu: f64, b: f64, m_target: usize) -> Result<BumpClassSpec> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    if m_target == 0 {
        return Err(Error::InvalidArgument("bump count must be >= 1".into()));
    }
    if m_target > MAX_BUMPS {
        return Err(Error::InvalidArgument(format!(
            "bump count {m_target} exceeds the cap {MAX_BUMPS}"
        )));
    }
    if !(nu > 0.0) || !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bump class needs nu > 0 and B > 0 (got {nu}, {b})"
        )));
    }
    let mut per_axis = (m_target as f64).powf(1.0 / d as f64).ceil() as usize;
    // undo floating-point overshoot of the root
    while per_axis > 1 && (per_axis - 1).checked_pow(d as u32).is_some_and(|v| v >= m_target) {
        per_axis -= 1;
    }
    let m = per_axis
        .checked_pow(d as u32)
        .filter(|&m| m <= MAX_BUMPS)
        .ok_or_else(|| Error::InvalidArgument("bump grid too fine".into()))?;
    let w = 1.0 / per_axis as f64;
    let c0 = calibration_constant(nu, d);
    let s = nu + d as f64 / 2.0;
    let eps = b * c0 * w.powf(s);
    let mut spec = BumpClassSpec {
        dim: d,
        nu,
        b,
        per_axis,
        w,
        m,
        eps,
        c0,
        signs: vec![1; m],
        i0: 0.0,
        i0_err: 0.0,
    };
    let c = spec.center(0);
    let lo: Vec<f64> = c.iter().map(|v| v - w / 2.0).collect();
    let hi: Vec<f64> = c.iter().map(|v| v + w / 2.0).collect();
    let one = |x: &[f64]| spec.bump(0, x);
    let res = oracle::integrate_box(&lo, &hi, &one, &OracleConfig::default())?;
    if !res.value.is_finite() || res.value <= 0.0 {
        return Err(Error::Oracle(format!("bump integral {} is not positive", res.value)));
    }
    spec.i0 = res.value;
    spec.i0_err = res.err_estimate;
    Ok(spec)
}

/// Bump class with uniformly random signs.
pub fn make_bump_class<R: Rng + ?Sized>(
    d: usize,
    nu: f64,
    b: f64,
    m_target: usize,
    rng: &mut R,
) -> Result<BumpClassSpec> {
    let mut spec = build(d, nu, b, m_target)?;
    for s in &mut spec.signs {
        *s = if rng.random::<bool>() { 1 } else { -1 };
    }
    Ok(spec)
}

/// Bump class with the given signs; their count must equal the grid size.
pub fn make_bump_class_with_signs(
    d: usize,
    nu: f64,
    b: f64,
    m_target: usize,
    signs: &[i8],
) -> Result<BumpClassSpec> {
    let mut spec = build(d, nu, b, m_target)?;
    if signs.len() != spec.m {
        return Err(Error::InvalidArgument(format!(
            "{} signs given for {} bumps",
            signs.len(),
            spec.m
        )));
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidArgument("signs must be +1 or -1".into()));
    }
    spec.signs = signs.to_vec();
    Ok(spec)
}

/// Query index `i`, observe `ε·S_i + N(0, σ²)`; the target is `I0·ΣS`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignGame {
    pub m: usize,
    pub eps: f64,
    pub sigma: f64,
    signs: Vec<i8>,
    pub i0: f64,
}

impl SignGame {
    pub fn new(eps: f64, sigma: f64, signs: Vec<i8>, i0: f64) -> Result<Self> {
        if signs.is_empty() || signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(
                "signs must be a nonempty vector of +1/-1".into(),
            ));
        }
        if !(sigma >= 0.0) || !eps.is_finite() || !i0.is_finite() {
            return Err(Error::InvalidArgument("invalid sign game parameters".into()));
        }
        Ok(SignGame {
            m: signs.len(),
            eps,
            sigma,
            signs,
            i0,
        })
    }

    /// The game played against a bump class with noise `sigma`.
    pub fn from_bump(spec: &BumpClassSpec, sigma: f64) -> Result<Self> {
        SignGame::new(spec.eps, sigma, spec.signs.clone(), spec.i0)
    }

    /// One noisy draw for the 1-based index `i`.
    pub fn query<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<f64> {
        if i == 0 || i > self.m {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.m,
            });
        }
        let z: f64 = StandardNormal.sample(rng);
        Ok(self.eps * self.signs[i - 1] as f64 + self.sigma * z)
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn target(&self) -> f64 {
        self.i0 * self.signs.iter().map(|&s| s as f64).sum::<f64>()
    }
}
