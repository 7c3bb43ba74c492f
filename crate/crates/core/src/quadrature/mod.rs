//! Estimation strategies: plain Monte Carlo, maximum-variance sampling with
//! the posterior-mean integral, and the two-batch estimator that corrects the
//! posterior-mean integral with a Monte Carlo estimate of the residual.
//!
//! All three share one driver. A run has an MVS batch of `n₁` points (the
//! initial design included) and an MC batch of `n₂` points drawn from `p`.
//! At time `t` let `B₁(t)` and `B₂(t)` be the samples of each batch taken so
//! far; the running estimate is
//!
//! ```text
//! Î_t = ∫ p μ_{B₁(t)} + mean_{B₂(t)} (y − μ_{B₁(t)}(x))
//! ```
//!
//! with empty sums read as zero. MC is `n₁ = 0`, MVS is `n₂ = 0`.

mod kernel_mean;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gp::GpState;
use crate::integrands::{NoisyOracle, WeightDensity};
use crate::kernel::KernelSpec;
use crate::qmc::Kronecker;

pub use kernel_mean::QMC_POINTS;
use kernel_mean::KernelMean;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Mc,
    Mvs,
    MvsMc,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Mc => "mc",
            StrategyKind::Mvs => "mvs",
            StrategyKind::MvsMc => "mvs-mc",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mc" => Ok(StrategyKind::Mc),
            "mvs" => Ok(StrategyKind::Mvs),
            "mvs-mc" | "mvsmc" => Ok(StrategyKind::MvsMc),
            _ => Err(Error::Config(format!("unknown strategy `{s}`"))),
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
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

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Total query budget `T`.
    pub budget: usize,
    /// Fraction `ρ` of the budget given to the MVS batch (`mvs-mc` only).
    #[serde(default = "default_split")]
    pub split: f64,
    /// Alternate MVS and MC draws in time.
    #[serde(default)]
    pub interleave: bool,
    /// Candidate set size for the variance argmax; `None` means `2048·d`.
    #[serde(default)]
    pub candidate_count: Option<usize>,
    /// Accept any candidate whose standard deviation is at least `γ` times
    /// the maximum.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Random initial points, counted against the MVS batch.
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    /// Times at which running estimates are recorded; `T` is always added.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, budget: usize) -> Self {
        StrategyConfig {
            kind,
            budget,
            split: default_split(),
            interleave: false,
            candidate_count: None,
            gamma: default_gamma(),
            n_init: default_n_init(),
            checkpoints: Vec::new(),
        }
    }

    pub fn mc(budget: usize) -> Self {
        Self::new(StrategyKind::Mc, budget)
    }

    pub fn mvs(budget: usize) -> Self {
        Self::new(StrategyKind::Mvs, budget)
    }

    pub fn mvs_mc(budget: usize, split: f64) -> Self {
        StrategyConfig {
            split,
            ..Self::new(StrategyKind::MvsMc, budget)
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<usize>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.split) {
            return Err(Error::Config(format!("split must lie in [0, 1], got {}", self.split)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.candidate_count == Some(0) {
            return Err(Error::Config("candidate_count must be >= 1".into()));
        }
        Ok(())
    }

    pub fn candidates(&self, d: usize) -> usize {
        self.candidate_count.unwrap_or(2048 * d)
    }

    /// `(n₁, n₂)`: MVS and MC batch sizes. `⌊ρT⌋` rounds toward the MVS
    /// batch's complement, so `ρ = 1/2` and even `T` give `T/2` each.
    pub fn batch_sizes(&self) -> (usize, usize) {
        let t = self.budget;
        let n1 = match self.kind {
            StrategyKind::Mc => 0,
            StrategyKind::Mvs => t,
            StrategyKind::MvsMc => ((self.split * t as f64).floor() as usize).min(t),
        };
        (n1, t - n1)
    }

    fn checkpoint_times(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self
            .checkpoints
            .iter()
            .copied()
            .filter(|&t| t >= 1 && t <= self.budget)
            .collect();
        c.push(self.budget);
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// GP settings for the MVS batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub kernel: KernelSpec,
    /// Regularizer; `None` uses `max(σ², 1e−10·scale)`.
    pub lambda: Option<f64>,
}

impl GpConfig {
    pub fn new(kernel: KernelSpec) -> Self {
        GpConfig {
            kernel,
            lambda: None,
        }
    }

    pub fn lambda_for(&self, sigma: f64) -> f64 {
        self.lambda
            .unwrap_or_else(|| (sigma * sigma).max(1e-10 * self.kernel.scale))
    }
}

/// Initial random points and their noisy observations, shared by the
/// MVS-based strategies of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDesign {
    pub points: Vec<Vec<f64>>,
    pub observations: Vec<f64>,
}

impl InitialDesign {
    /// Draws `n` points from `weight` and queries them.
    pub fn draw<R: Rng + ?Sized>(
        oracle: &mut NoisyOracle<'_>,
        weight: &WeightDensity,
        n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let points: Vec<Vec<f64>> = (0..n).map(|_| weight.sample(rng)).collect();
        let observations = points
            .iter()
            .map(|x| oracle.query(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(InitialDesign {
            points,
            observations,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Batch {
    Mvs,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateTrace {
    pub kind: StrategyKind,
    /// `(t, Î_t)` at each checkpoint, ending with `t = T`.
    pub checkpoints: Vec<(usize, f64)>,
    pub estimate: f64,
    /// `Î₁ = ∫ p μ` from the full MVS batch (zero for MC).
    pub initial_estimate: f64,
    /// `R̂` from the full MC batch (zero for MVS).
    pub residual: f64,
    /// Queried points in time order.
    pub points: Vec<Vec<f64>>,
    pub observations: Vec<f64>,
    pub batches: Vec<Batch>,
    /// Kernel and regularizer of the MVS batch, if any.
    pub kernel: Option<KernelSpec>,
    pub lambda: Option<f64>,
}

/// Posterior variances of a fixed candidate set, updated in `O(N·t)` per
/// observation from the new Cholesky row:
/// `v_c[t] = (k(x_t, c) − Σ_{j<t} L[t,j] v_c[j]) / L[t,t]`,
/// `σ²_t(c) = σ²_{t−1}(c) − v_c[t]²`.
struct VarianceTracker {
    candidates: Vec<Vec<f64>>,
    rows: Vec<f64>,
    var: Vec<f64>,
    seen: usize,
    lambda: f64,
}

impl VarianceTracker {
    fn new(candidates: Vec<Vec<f64>>, state: &GpState) -> Self {
        let n = candidates.len();
        let mut t = VarianceTracker {
            candidates,
            rows: Vec::new(),
            var: vec![state.spec().scale; n],
            seen: 0,
            lambda: state.effective_lambda(),
        };
        t.sync(state);
        t
    }

    fn sync(&mut self, state: &GpState) {
        if state.effective_lambda() != self.lambda {
            // jitter was added and the factor rebuilt; start over
            self.rows.clear();
            self.var.iter_mut().for_each(|v| *v = state.spec().scale);
            self.seen = 0;
            self.lambda = state.effective_lambda();
        }
        let n = self.candidates.len();
        let spec = state.spec();
        while self.seen < state.len() {
            let t = self.seen;
            let l = state.cholesky().row(t);
            let x = &state.xs()[t];
            let mut r: Vec<f64> = self.candidates.iter().map(|c| spec.eval_unchecked(x, c)).collect();
            for (j, lj) in l[..t].iter().enumerate() {
                let prev = &self.rows[j * n..(j + 1) * n];
                r.iter_mut().zip(prev).for_each(|(a, b)| *a -= lj * b);
            }
            let inv = 1.0 / l[t];
            for (a, v) in r.iter_mut().zip(self.var.iter_mut()) {
                *a *= inv;
                *v -= *a * *a;
            }
            self.rows.extend_from_slice(&r);
            self.seen += 1;
        }
    }

    fn select(&self, gamma: f64) -> usize {
        argmax_rule(self.var.iter().map(|v| v.max(0.0)), gamma)
    }
}

// Lowest index whose variance is at least γ² times the maximum (std ≥ γ·max).
fn argmax_rule(vars: impl Iterator<Item = f64> + Clone, gamma: f64) -> usize {
    let max = vars.clone().fold(f64::NEG_INFINITY, f64::max);
    let threshold = gamma * gamma * max;
    vars.enumerate()
        .find(|&(_, v)| v >= threshold)
        .map_or(0, |(i, _)| i)
}

/// Index of the first candidate with `σ_{t−1}(x) ≥ γ · max σ_{t−1}`; with
/// `γ = 1` this is the lowest-index exact maximizer.
pub fn select_max_variance(state: &GpState, candidates: &[Vec<f64>], gamma: f64) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("candidate set is empty".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let vars = candidates
        .iter()
        .map(|c| state.posterior_var(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_rule(vars.iter().copied(), gamma))
}

/// `∫ p μ_t`: exact kernel means in 1-D (closed form or adaptive quadrature),
/// `10⁵` quasi-random points otherwise.
pub fn integrate_posterior_mean(state: &GpState, weight: &WeightDensity) -> Result<f64> {
    check_dim(state.dim(), weight.dim())?;
    if state.is_empty() {
        return Ok(0.0);
    }
    let km = KernelMean::new(state.spec(), weight);
    let alpha = state.alpha()?;
    Ok(state
        .xs()
        .iter()
        .zip(alpha)
        .map(|(x, a)| a * km.eval(state.spec(), x))
        .sum())
}

/// `(4 p_max / T)·‖f − μ‖²_{L²} + 2σ²/T`, with `T` the full budget (the
/// residual batch has `T/2` points).
pub fn residual_variance_bound(p_max: f64, t: usize, l2_err_sq: f64, sigma: f64) -> f64 {
    let t = t as f64;
    4.0 * p_max / t * l2_err_sq + 2.0 * sigma * sigma / t
}

/// `R̂ = mean(y − μ(x))` over `n` fresh draws `x ~ p`.
pub fn residual_estimate<R: Rng + ?Sized>(
    state: &GpState,
    oracle: &mut NoisyOracle<'_>,
    weight: &WeightDensity,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("residual batch is empty".into()));
    }
    let alpha = state.alpha()?;
    let mut sum = 0.0;
    for _ in 0..n {
        let x = weight.sample(rng);
        let y = oracle.query(&x)?;
        sum += y - state.mean_with_alpha(alpha, &x);
    }
    Ok(sum / n as f64)
}

/// Runs only the MVS batch of `n` points and returns the posterior state.
pub fn mvs_batch<R: Rng + ?Sized>(
    oracle: &mut NoisyOracle<'_>,
    weight: &WeightDensity,
    config: &StrategyConfig,
    gp: &GpConfig,
    init: Option<&InitialDesign>,
    n: usize,
    rng: &mut R,
) -> Result<GpState> {
    let mut run = MvsRun::start(oracle, weight, config, gp, init, rng)?;
    while run.state.len() < n {
        run.step(oracle, config.gamma)?;
    }
    Ok(run.state)
}

struct MvsRun {
    state: GpState,
    tracker: VarianceTracker,
    pending: Vec<(Vec<f64>, f64)>,
}

impl MvsRun {
    fn start<R: Rng + ?Sized>(
        oracle: &mut NoisyOracle<'_>,
        weight: &WeightDensity,
        config: &StrategyConfig,
        gp: &GpConfig,
        init: Option<&InitialDesign>,
        rng: &mut R,
    ) -> Result<Self> {
        let d = oracle.dim();
        check_dim(d, weight.dim())?;
        let lambda = gp.lambda_for(oracle.sigma());
        let state = GpState::new(gp.kernel, lambda, d)?;
        let seq = Kronecker::randomized(d, rng);
        let candidates = seq.points(config.candidates(d));
        let tracker = VarianceTracker::new(candidates, &state);
        let pending = match init {
            Some(design) => {
                check_dim(design.points.len(), design.observations.len())?;
                design
                    .points
                    .iter()
                    .cloned()
                    .zip(design.observations.iter().copied())
                    .take(config.n_init)
                    .collect()
            }
            None => {
                let d = InitialDesign::draw(oracle, weight, config.n_init, rng)?;
                d.points.into_iter().zip(d.observations).collect()
            }
        };
        let mut pending: Vec<_> = pending;
        pending.reverse();
        Ok(MvsRun {
            state,
            tracker,
            pending,
        })
    }

    /// Adds the next initial point, or the variance maximizer once the
    /// initial design is used up.
    fn step(&mut self, oracle: &mut NoisyOracle<'_>, gamma: f64) -> Result<()> {
        let (x, y) = match self.pending.pop() {
            Some(p) => p,
            None => {
                let i = self.tracker.select(gamma);
                let x = self.tracker.candidates[i].clone();
                let y = oracle.query(&x)?;
                (x, y)
            }
        };
        self.state.push(x, Some(y))?;
        self.tracker.sync(&self.state);
        Ok(())
    }
}

/// Time order of the two batches: MVS first, or (when interleaving) the
/// initial design first and then alternating MVS/MC draws.
fn time_order(n1: usize, n2: usize, n_init: usize, interleave: bool) -> Vec<Batch> {
    let mut order = Vec::with_capacity(n1 + n2);
    if !interleave {
        order.extend(std::iter::repeat_n(Batch::Mvs, n1));
        order.extend(std::iter::repeat_n(Batch::Mc, n2));
        return order;
    }
    let head = n_init.min(n1);
    order.extend(std::iter::repeat_n(Batch::Mvs, head));
    let (mut a, mut b) = (n1 - head, n2);
    while a > 0 || b > 0 {
        if a > 0 {
            order.push(Batch::Mvs);
            a -= 1;
        }
        if b > 0 {
            order.push(Batch::Mc);
            b -= 1;
        }
    }
    order
}

/// Runs any strategy. MVS-based strategies use `init` when given and
/// otherwise draw `n_init` points themselves; MC ignores both `gp` and `init`.
///
/// Random numbers are consumed in a fixed order (candidate shift, initial
/// design if drawn, then MC sample points) and queries are issued batch by
/// batch, so `ρ = 0` reproduces [`run_mc`] and `ρ = 1` reproduces
/// [`run_mvs`] under equal streams, and interleaving changes only the
/// running estimates, never the final one.
pub fn run_strategy<R: Rng + ?Sized>(
    oracle: &mut NoisyOracle<'_>,
    weight: &WeightDensity,
    config: &StrategyConfig,
    gp: Option<&GpConfig>,
    init: Option<&InitialDesign>,
    rng: &mut R,
) -> Result<EstimateTrace> {
    config.validate()?;
    check_dim(oracle.dim(), weight.dim())?;
    let (n1, n2) = config.batch_sizes();
    let order = time_order(n1, n2, config.n_init, config.interleave);
    let times = config.checkpoint_times();

    // MVS batch sizes needed at each checkpoint
    let prefix = |t: usize| order[..t].iter().filter(|&&b| b == Batch::Mvs).count();
    let mut needed: Vec<usize> = times.iter().map(|&t| prefix(t)).collect();
    needed.sort_unstable();
    needed.dedup();

    let mut snapshots: Vec<(usize, GpState, f64)> = Vec::new();
    let mut kernel = None;
    let mut lambda = None;
    let mut mvs_points = Vec::with_capacity(n1);
    let mut mvs_obs = Vec::with_capacity(n1);
    if n1 > 0 {
        let gp = gp.ok_or_else(|| Error::Config("MVS strategies need a GP configuration".into()))?;
        let mut run = MvsRun::start(oracle, weight, config, gp, init, rng)?;
        let km = KernelMean::new(&gp.kernel, weight);
        let mut z = Vec::with_capacity(n1);
        for k in 1..=n1 {
            run.step(oracle, config.gamma)?;
            z.push(km.eval(&gp.kernel, run.state.xs().last().unwrap()));
            if needed.binary_search(&k).is_ok() {
                let alpha = run.state.alpha()?;
                let i1: f64 = alpha.iter().zip(&z).map(|(a, z)| a * z).sum();
                snapshots.push((k, run.state.clone(), i1));
            }
        }
        mvs_points = run.state.xs().to_vec();
        mvs_obs = run.state.ys().unwrap_or(&[]).to_vec();
        kernel = Some(gp.kernel);
        lambda = Some(run.state.effective_lambda());
    }

    let mut mc_points = Vec::with_capacity(n2);
    let mut mc_obs = Vec::with_capacity(n2);
    for _ in 0..n2 {
        let x = weight.sample(rng);
        let y = oracle.query(&x)?;
        mc_points.push(x);
        mc_obs.push(y);
    }

    let estimate_at = |k1: usize, k2: usize| -> Result<(f64, f64)> {
        let (i1, snap) = match snapshots.iter().find(|(k, _, _)| *k == k1) {
            Some((_, s, i1)) => (*i1, Some(s)),
            None if k1 == 0 => (0.0, None),
            None => unreachable!("snapshot for every checkpoint"),
        };
        if k2 == 0 {
            return Ok((i1, 0.0));
        }
        let mut sum = 0.0;
        match snap {
            Some(s) => {
                let alpha = s.alpha()?;
                for (x, y) in mc_points[..k2].iter().zip(&mc_obs) {
                    sum += y - s.mean_with_alpha(alpha, x);
                }
            }
            None => sum = mc_obs[..k2].iter().sum(),
        }
        Ok((i1, sum / k2 as f64))
    };

    let mut checkpoints = Vec::with_capacity(times.len());
    for &t in &times {
        let k1 = prefix(t);
        let (i1, r) = estimate_at(k1, t - k1)?;
        checkpoints.push((t, i1 + r));
    }
    let (initial_estimate, residual) = estimate_at(n1, n2)?;

    let (mut mvs_it, mut mc_it) = (
        mvs_points.into_iter().zip(mvs_obs),
        mc_points.into_iter().zip(mc_obs),
    );
    let mut points = Vec::with_capacity(n1 + n2);
    let mut observations = Vec::with_capacity(n1 + n2);
    for b in &order {
        let (x, y) = match b {
            Batch::Mvs => mvs_it.next(),
            Batch::Mc => mc_it.next(),
        }
        .expect("batch sizes match the order");
        points.push(x);
        observations.push(y);
    }

    Ok(EstimateTrace {
        kind: config.kind,
        estimate: initial_estimate + residual,
        checkpoints,
        initial_estimate,
        residual,
        points,
        observations,
        batches: order,
        kernel,
        lambda,
    })
}

/// `Î = (1/T) Σ y_t` with `x_t ~ p`.
pub fn run_mc<R: Rng + ?Sized>(
    oracle: &mut NoisyOracle<'_>,
    weight: &WeightDensity,
    budget: usize,
    checkpoints: &[usize],
    rng: &mut R,
) -> Result<EstimateTrace> {
    let cfg = StrategyConfig::mc(budget).with_checkpoints(checkpoints.to_vec());
    run_strategy(oracle, weight, &cfg, None, None, rng)
}

/// Maximum-variance sampling for `T` rounds, then `Î = ∫ p μ_T`.
pub fn run_mvs<R: Rng + ?Sized>(
    oracle: &mut NoisyOracle<'_>,
    weight: &WeightDensity,
    config: &StrategyConfig,
    gp: &GpConfig,
    init: Option<&InitialDesign>,
    rng: &mut R,
) -> Result<EstimateTrace> {
    let cfg = StrategyConfig {
        kind: StrategyKind::Mvs,
        ..config.clone()
    };
    run_strategy(oracle, weight, &cfg, Some(gp), init, rng)
}

/// Two-batch estimator: `⌊ρT⌋` MVS points give `μ_B` and `Î₁ = ∫ p μ_B`; the
/// remaining draws `x ~ p` give `R̂ = mean(y − μ_B(x))`; `Î = Î₁ + R̂`.
pub fn run_mvs_mc<R: Rng + ?Sized>(
    oracle: &mut NoisyOracle<'_>,
    weight: &WeightDensity,
    config: &StrategyConfig,
    gp: &GpConfig,
    init: Option<&InitialDesign>,
    rng: &mut R,
) -> Result<EstimateTrace> {
    let cfg = StrategyConfig {
        kind: StrategyKind::MvsMc,
        ..config.clone()
    };
    run_strategy(oracle, weight, &cfg, Some(gp), init, rng)
}
