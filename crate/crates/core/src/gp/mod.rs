//! Exact GP regression with a regularizer `λ`:
//!
//! ```text
//! μ_t(x)  = k_t(x)ᵀ (K_t + λI)⁻¹ y_t
//! σ²_t(x) = k(x,x) − k_t(x)ᵀ (K_t + λI)⁻¹ k_t(x)
//! ```
//!
//! The Cholesky factor of `K_t + λI` grows one row per observation, so a
//! sequence of `T` single-point updates costs `O(T³)` overall rather than
//! `O(T⁴)`.

mod confidence;
mod likelihood;

pub use confidence::{confidence_bounds, ConfidenceBand};
pub use likelihood::{
    fit_hyperparams, log_marginal_likelihood, log_marginal_likelihood_scale_grad, FitBounds,
};

use std::sync::OnceLock;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::CholeskyFactor;

/// Maximum number of jitter increments tried after a failed factorization.
pub const MAX_JITTER_RETRIES: usize = 3;

/// Posterior state after `t` observations.
#[derive(Clone, Debug)]
pub struct GpState {
    spec: KernelSpec,
    lambda: f64,
    jitter: f64,
    dim: usize,
    xs: Vec<Vec<f64>>,
    ys: Option<Vec<f64>>,
    chol: CholeskyFactor,
    alpha: OnceLock<Vec<f64>>,
}

impl GpState {
    /// Empty state (prior).
    pub fn new(spec: KernelSpec, lambda: f64, dim: usize) -> Result<Self> {
        spec.validate()?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda must be > 0, got {lambda}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        Ok(GpState {
            spec,
            lambda,
            jitter: 0.0,
            dim,
            xs: Vec::new(),
            ys: None,
            chol: CholeskyFactor::new(),
            alpha: OnceLock::new(),
        })
    }

    /// Builds the state from scratch with one factorization.
    pub fn from_observations(
        spec: KernelSpec,
        lambda: f64,
        dim: usize,
        xs: Vec<Vec<f64>>,
        ys: Option<Vec<f64>>,
    ) -> Result<Self> {
        let mut state = GpState::new(spec, lambda, dim)?;
        if let Some(ys) = &ys {
            if ys.len() != xs.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} points but {} observations",
                    xs.len(),
                    ys.len()
                )));
            }
            check_finite(ys, "observation")?;
        }
        for x in &xs {
            check_dim(dim, x.len())?;
            check_finite(x, "observation point")?;
        }
        state.xs = xs;
        state.ys = ys.filter(|_| !state.xs.is_empty());
        state.refactor()?;
        Ok(state)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Regularizer actually on the diagonal: `λ` plus any jitter added after
    /// a failed factorization.
    pub fn effective_lambda(&self) -> f64 {
        self.lambda + self.jitter
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn ys(&self) -> Option<&[f64]> {
        self.ys.as_deref()
    }

    pub fn cholesky(&self) -> &CholeskyFactor {
        &self.chol
    }

    fn diag(&self) -> f64 {
        self.spec.scale + self.lambda + self.jitter
    }

    fn refactor(&mut self) -> Result<()> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let mut chol = CholeskyFactor::new();
            let diag = self.diag();
            let ok = self.xs.iter().enumerate().all(|(i, xi)| {
                let cross: Vec<f64> = self.xs[..i]
                    .iter()
                    .map(|xj| self.spec.eval_unchecked(xj, xi))
                    .collect();
                chol.append(&cross, diag).is_ok()
            });
            if ok {
                self.chol = chol;
                self.alpha = OnceLock::new();
                return Ok(());
            }
            if attempts > MAX_JITTER_RETRIES {
                return Err(Error::Factorization { attempts });
            }
            self.jitter += 1e-8 * self.spec.scale;
        }
    }

    /// Appends one observation in place. `y` must be present iff the state
    /// already carries observations (an empty state accepts either).
    pub fn push(&mut self, x: Vec<f64>, y: Option<f64>) -> Result<()> {
        check_dim(self.dim, x.len())?;
        check_finite(&x, "observation point")?;
        if let Some(y) = y {
            if !y.is_finite() {
                return Err(Error::NonFinite("observation"));
            }
        }
        match (&mut self.ys, y, self.xs.is_empty()) {
            (Some(ys), Some(y), _) => ys.push(y),
            (None, Some(y), true) => self.ys = Some(vec![y]),
            (None, None, _) => {}
            (Some(_), None, _) => {
                return Err(Error::ObservationState(
                    "state carries observations but none was given",
                ))
            }
            (None, Some(_), false) => {
                return Err(Error::ObservationState(
                    "state was built without observations",
                ))
            }
        }
        let cross = self.cross(&x);
        self.xs.push(x);
        self.alpha = OnceLock::new();
        if self.chol.append(&cross, self.diag()).is_err() {
            let jitter = self.jitter;
            if let Err(e) = self.refactor() {
                self.jitter = jitter;
                self.xs.pop();
                if let Some(ys) = &mut self.ys {
                    ys.pop();
                    if ys.is_empty() {
                        self.ys = None;
                    }
                }
                return Err(e);
            }
        }
        Ok(())
    }

    /// Returns a new state with one more observation; `self` is unchanged.
    pub fn extend(&self, x: Vec<f64>, y: Option<f64>) -> Result<GpState> {
        let mut next = self.clone();
        next.push(x, y)?;
        Ok(next)
    }

    /// `k_t(x)` without checks.
    pub fn cross(&self, x: &[f64]) -> Vec<f64> {
        self.xs
            .iter()
            .map(|xi| self.spec.eval_unchecked(xi, x))
            .collect()
    }

    /// `(K_t + λI)⁻¹ y_t`, computed once per state.
    pub fn alpha(&self) -> Result<&[f64]> {
        if self.xs.is_empty() {
            return Ok(&[]);
        }
        let ys = self
            .ys
            .as_ref()
            .ok_or(Error::ObservationState("posterior mean needs observations"))?;
        Ok(self.alpha.get_or_init(|| self.chol.solve(ys)))
    }

    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let alpha = self.alpha()?;
        Ok(self.mean_with_alpha(alpha, x))
    }

    #[inline]
    pub(crate) fn mean_with_alpha(&self, alpha: &[f64], x: &[f64]) -> f64 {
        self.xs
            .iter()
            .zip(alpha)
            .map(|(xi, a)| a * self.spec.eval_unchecked(xi, x))
            .sum()
    }

    /// Unclamped `σ²_t(x)`; may be slightly negative from rounding.
    pub fn posterior_var_raw(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let v = self.chol.solve_lower(&self.cross(x));
        Ok(self.spec.scale - v.iter().map(|a| a * a).sum::<f64>())
    }

    /// `σ²_t(x)` clamped at zero.
    pub fn posterior_var(&self, x: &[f64]) -> Result<f64> {
        Ok(self.posterior_var_raw(x)?.max(0.0))
    }

    pub fn posterior_std(&self, x: &[f64]) -> Result<f64> {
        Ok(self.posterior_var(x)?.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec() -> KernelSpec {
        KernelSpec::new(1.5, 0.2, 2.0).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect()
    }

    #[test]
    fn prior_values() {
        let gp = GpState::new(spec(), 0.01, 1).unwrap();
        assert_eq!(gp.posterior_mean(&[0.3]).unwrap(), 0.0);
        assert_eq!(gp.posterior_var(&[0.3]).unwrap(), 2.0);
    }

    #[test]
    fn one_observation_by_hand() {
        let lambda = 0.25;
        let gp = GpState::new(spec(), lambda, 1)
            .unwrap()
            .extend(vec![0.4], Some(1.3))
            .unwrap();
        let m = gp.posterior_mean(&[0.4]).unwrap();
        assert!((m - 1.3 * 2.0 / (2.0 + lambda)).abs() < 1e-14);
        let v = gp.posterior_var(&[0.4]).unwrap();
        assert!((v - 2.0 * lambda / (2.0 + lambda)).abs() < 1e-14);
    }

    #[test]
    fn interpolation_limit() {
        let gp = GpState::from_observations(
            spec(),
            1e-12,
            1,
            vec![vec![0.1], vec![0.5], vec![0.9]],
            Some(vec![1.0, -1.0, 0.5]),
        )
        .unwrap();
        assert!(gp.posterior_var(&[0.5]).unwrap() <= 1e-6);
        assert!((gp.posterior_mean(&[0.5]).unwrap() + 1.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_design_gives_symmetric_mean() {
        let gp = GpState::from_observations(
            spec(),
            0.1,
            1,
            vec![vec![0.3], vec![0.7]],
            Some(vec![1.0, 1.0]),
        )
        .unwrap();
        for &d in &[0.0, 0.05, 0.2, 0.45] {
            let a = gp.posterior_mean(&[0.5 - d]).unwrap();
            let b = gp.posterior_mean(&[0.5 + d]).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn duplicate_points_stay_factorizable() {
        let mut gp = GpState::new(spec(), 1e-6, 1).unwrap();
        for _ in 0..5 {
            gp.push(vec![0.25], Some(1.0)).unwrap();
        }
        assert_eq!(gp.len(), 5);
        assert!(gp.posterior_var(&[0.25]).unwrap() < 1e-5);
    }

    #[test]
    fn observation_state_contract() {
        let gp = GpState::new(spec(), 0.1, 1).unwrap();
        let without = gp.extend(vec![0.2], None).unwrap();
        assert!(without.ys().is_none());
        assert!(matches!(
            without.posterior_mean(&[0.2]),
            Err(Error::ObservationState(_))
        ));
        assert!(without.extend(vec![0.3], Some(1.0)).is_err());
        let with = gp.extend(vec![0.2], Some(1.0)).unwrap();
        assert!(with.extend(vec![0.3], None).is_err());
        assert!(gp.extend(vec![0.2, 0.1], None).is_err());
        assert!(gp.extend(vec![f64::NAN], None).is_err());
        assert!(gp.extend(vec![0.1], Some(f64::INFINITY)).is_err());
        assert!(GpState::new(spec(), 0.0, 1).is_err());
    }

    #[test]
    fn factor_matches_regularized_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = random_points(&mut rng, 30, 2);
        let gp = GpState::from_observations(spec(), 0.05, 2, xs.clone(), None).unwrap();
        let mut k = kernel_matrix(&spec(), &xs).unwrap();
        k.add_diagonal(gp.effective_lambda());
        let r = gp.cholesky().reconstruct();
        for i in 0..30 {
            for j in 0..30 {
                assert!((r[(i, j)] - k[(i, j)]).abs() <= 1e-8 * k[(i, j)].abs().max(1e-300));
            }
        }
    }

    #[test]
    fn incremental_matches_rebuild() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &d in &[1usize, 2, 3] {
            let xs = random_points(&mut rng, 50, d);
            let ys: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut inc = GpState::new(spec(), 0.01, d).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                inc = inc.extend(x.clone(), Some(*y)).unwrap();
            }
            let full = GpState::from_observations(spec(), 0.01, d, xs, Some(ys)).unwrap();
            for q in random_points(&mut rng, 20, d) {
                let (m1, m2) = (inc.posterior_mean(&q).unwrap(), full.posterior_mean(&q).unwrap());
                let (v1, v2) = (inc.posterior_var(&q).unwrap(), full.posterior_var(&q).unwrap());
                assert!((m1 - m2).abs() <= 1e-8 * m2.abs().max(1.0));
                assert!((v1 - v2).abs() <= 1e-8 * v2.abs().max(1.0));
            }
        }
    }

    #[test]
    fn variance_is_bounded_and_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid: Vec<Vec<f64>> = (0..41).map(|i| vec![i as f64 / 40.0]).collect();
        let mut gp = GpState::new(spec(), 1e-4, 1).unwrap();
        let mut prev: Vec<f64> = grid.iter().map(|q| gp.posterior_var(q).unwrap()).collect();
        for _ in 0..40 {
            gp.push(vec![rng.random()], None).unwrap();
            for (q, p) in grid.iter().zip(prev.iter_mut()) {
                let v = gp.posterior_var(q).unwrap();
                let raw = gp.posterior_var_raw(q).unwrap();
                assert!(raw >= -1e-10 && v <= 2.0 + 1e-10);
                assert!(v.sqrt() <= p.sqrt() + 1e-10);
                *p = v;
            }
        }
    }
}
