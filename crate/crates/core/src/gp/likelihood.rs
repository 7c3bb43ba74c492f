//! Log marginal likelihood and hyperparameter fitting.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::CholeskyFactor;

fn factor(spec: &KernelSpec, lambda: f64, xs: &[Vec<f64>]) -> Result<CholeskyFactor> {
    let mut chol = CholeskyFactor::new();
    for (i, xi) in xs.iter().enumerate() {
        let cross: Vec<f64> = xs[..i].iter().map(|xj| spec.eval_unchecked(xj, xi)).collect();
        chol.append(&cross, spec.scale + lambda)
            .map_err(|_| Error::Factorization { attempts: 1 })?;
    }
    Ok(chol)
}

fn check_data(xs: &[Vec<f64>], ys: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("need at least one observation".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points but {} observations",
            xs.len(),
            ys.len()
        )));
    }
    check_finite(ys, "observation")
}

/// `log N(y; 0, K + λI)`.
pub fn log_marginal_likelihood(
    spec: &KernelSpec,
    lambda: f64,
    xs: &[Vec<f64>],
    ys: &[f64],
) -> Result<f64> {
    spec.validate()?;
    check_data(xs, ys)?;
    let chol = factor(spec, lambda, xs)?;
    let v = chol.solve_lower(ys);
    let quad: f64 = v.iter().map(|a| a * a).sum();
    let t = ys.len() as f64;
    Ok(-0.5 * quad - 0.5 * chol.log_det() - 0.5 * t * (2.0 * std::f64::consts::PI).ln())
}

/// Derivative of [`log_marginal_likelihood`] with respect to `spec.scale`:
/// `½ αᵀK₀α − ½ tr(A⁻¹K₀)` where `A = scale·K₀ + λI`, `α = A⁻¹y`.
pub fn log_marginal_likelihood_scale_grad(
    spec: &KernelSpec,
    lambda: f64,
    xs: &[Vec<f64>],
    ys: &[f64],
) -> Result<f64> {
    spec.validate()?;
    check_data(xs, ys)?;
    let chol = factor(spec, lambda, xs)?;
    let alpha = chol.solve(ys);
    let n = xs.len();
    let unit = KernelSpec { scale: 1.0, ..*spec };
    let mut quad = 0.0;
    let mut trace = 0.0;
    for i in 0..n {
        let col: Vec<f64> = xs.iter().map(|xj| unit.eval_unchecked(xj, &xs[i])).collect();
        quad += alpha[i] * col.iter().zip(&alpha).map(|(k, a)| k * a).sum::<f64>();
        trace += chol.solve(&col)[i];
    }
    Ok(0.5 * quad - 0.5 * trace)
}

/// Search box for `(lengthscale, scale)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub lengthscale: (f64, f64),
    pub scale: (f64, f64),
}

impl Default for FitBounds {
    fn default() -> Self {
        FitBounds {
            lengthscale: (0.01, 1.0),
            scale: (0.01, 100.0),
        }
    }
}

impl FitBounds {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("lengthscale", self.lengthscale), ("scale", self.scale)] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "invalid {name} bounds ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

const GRID: usize = 16;

fn log_grid((lo, hi): (f64, f64)) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..GRID)
        .map(|i| (a + (b - a) * i as f64 / (GRID - 1) as f64).exp())
        .collect()
}

/// Maximizes the log marginal likelihood over `(lengthscale, scale)` with `ν`
/// fixed: a 16×16 log-spaced grid, then Nelder–Mead in log space clamped to
/// the box.
pub fn fit_hyperparams(
    xs: &[Vec<f64>],
    ys: &[f64],
    nu: f64,
    lambda: f64,
    bounds: &FitBounds,
) -> Result<KernelSpec> {
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 observations to fit, got {}",
            xs.len()
        )));
    }
    check_data(xs, ys)?;
    bounds.validate()?;
    KernelSpec::new(nu, bounds.lengthscale.0, bounds.scale.0)?;

    let lo = [bounds.lengthscale.0.ln(), bounds.scale.0.ln()];
    let hi = [bounds.lengthscale.1.ln(), bounds.scale.1.ln()];
    let objective = |p: [f64; 2]| -> f64 {
        let p = [p[0].clamp(lo[0], hi[0]), p[1].clamp(lo[1], hi[1])];
        let spec = KernelSpec {
            nu,
            lengthscale: p[0].exp(),
            scale: p[1].exp(),
        };
        match log_marginal_likelihood(&spec, lambda, xs, ys) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };

    let mut best: Option<([f64; 2], f64)> = None;
    for &l in &log_grid(bounds.lengthscale) {
        for &s in &log_grid(bounds.scale) {
            let p = [l.ln(), s.ln()];
            let v = objective(p);
            if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
                best = Some((p, v));
            }
        }
    }
    let (start, start_val) = best.ok_or(Error::FitFailed)?;

    let step = [
        ((hi[0] - lo[0]) / GRID as f64).max(1e-12),
        ((hi[1] - lo[1]) / GRID as f64).max(1e-12),
    ];
    let (p, v) = nelder_mead(objective, start, step, 200);
    let p = if v <= start_val { p } else { start };
    Ok(KernelSpec {
        nu,
        lengthscale: p[0].clamp(lo[0], hi[0]).exp(),
        scale: p[1].clamp(lo[1], hi[1]).exp(),
    })
}

fn nelder_mead<F: Fn([f64; 2]) -> f64>(
    f: F,
    start: [f64; 2],
    step: [f64; 2],
    max_iter: usize,
) -> ([f64; 2], f64) {
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut vals = simplex.map(&f);
    for _ in 0..max_iter {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.map(|i| simplex[i]);
        vals = idx.map(|i| vals[i]);
        if (vals[2] - vals[0]).abs() <= 1e-10 * (1.0 + vals[0].abs()) {
            break;
        }
        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr < vals[0] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            if fe < fr {
                simplex[2] = expanded;
                vals[2] = fe;
            } else {
                simplex[2] = reflected;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = reflected;
            vals[2] = fr;
        } else {
            let contracted = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fc = f(contracted);
            if fc < vals[2].min(fr) {
                simplex[2] = contracted;
                vals[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        0.5 * (simplex[0][0] + simplex[i][0]),
                        0.5 * (simplex[0][1] + simplex[i][1]),
                    ];
                    vals[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (simplex[best], vals[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CholeskyFactor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn scalar_case() {
        let spec = KernelSpec::new(1.5, 0.3, 2.0).unwrap();
        let v = log_marginal_likelihood(&spec, 0.5, &[vec![0.2]], &[0.0]).unwrap();
        let want = -0.5 * 2.5f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((v - want).abs() < 1e-14);
    }

    #[test]
    fn permutation_invariant() {
        let spec = KernelSpec::new(1.5, 0.3, 2.0).unwrap();
        let xs = vec![vec![0.1], vec![0.5], vec![0.8], vec![0.33]];
        let ys = vec![1.0, -0.4, 0.2, 0.9];
        let a = log_marginal_likelihood(&spec, 0.1, &xs, &ys).unwrap();
        let order = [2, 0, 3, 1];
        let xs2: Vec<_> = order.iter().map(|&i| xs[i].clone()).collect();
        let ys2: Vec<_> = order.iter().map(|&i| ys[i]).collect();
        let b = log_marginal_likelihood(&spec, 0.1, &xs2, &ys2).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn scale_gradient_matches_central_difference() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin()).collect();
        for &scale in &[0.3, 1.0, 4.0] {
            let spec = KernelSpec::new(1.5, 0.25, scale).unwrap();
            let g = log_marginal_likelihood_scale_grad(&spec, 0.05, &xs, &ys).unwrap();
            let h = 1e-5 * scale;
            let at = |s: f64| {
                let sp = KernelSpec { scale: s, ..spec };
                log_marginal_likelihood(&sp, 0.05, &xs, &ys).unwrap()
            };
            let fd = (at(scale + h) - at(scale - h)) / (2.0 * h);
            assert!((g - fd).abs() <= 1e-4 * fd.abs().max(1e-8), "{g} vs {fd}");
        }
    }

    #[test]
    fn zero_data_drives_scale_to_lower_bound() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
        let ys = vec![0.0; 6];
        let b = FitBounds {
            lengthscale: (0.05, 1.0),
            scale: (0.1, 10.0),
        };
        let spec = fit_hyperparams(&xs, &ys, 1.5, 0.01, &b).unwrap();
        assert!((spec.scale / 0.1 - 1.0).abs() < 1e-9, "{spec:?}");
    }

    #[test]
    fn collapsed_bounds_return_the_only_candidate() {
        let xs = vec![vec![0.1], vec![0.4], vec![0.9]];
        let ys = vec![0.3, -0.2, 0.5];
        let b = FitBounds {
            lengthscale: (0.2, 0.2),
            scale: (1.5, 1.5),
        };
        let spec = fit_hyperparams(&xs, &ys, 1.5, 0.01, &b).unwrap();
        assert!((spec.lengthscale - 0.2).abs() < 1e-15 && (spec.scale - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_too_little_data() {
        let b = FitBounds::default();
        assert!(fit_hyperparams(&[vec![0.1], vec![0.2]], &[1.0, 2.0], 1.5, 0.1, &b).is_err());
    }

    #[test]
    fn recovers_lengthscale_from_gp_sample() {
        let truth = KernelSpec::new(1.5, 0.15, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let xs: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random::<f64>()]).collect();
        let mut chol = CholeskyFactor::new();
        for (i, xi) in xs.iter().enumerate() {
            let cross: Vec<f64> = xs[..i].iter().map(|xj| truth.eval_unchecked(xj, xi)).collect();
            chol.append(&cross, truth.scale + 1e-8).unwrap();
        }
        let z: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
        let ys: Vec<f64> = (0..50)
            .map(|i| (0..=i).map(|j| chol.get(i, j) * z[j]).sum())
            .collect();
        let fitted = fit_hyperparams(&xs, &ys, 1.5, 1e-6, &FitBounds::default()).unwrap();
        let err = (fitted.lengthscale.ln() - truth.lengthscale.ln()).abs();
        assert!(err <= 0.5, "fitted {fitted:?}");
    }
}
