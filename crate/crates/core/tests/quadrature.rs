use bq_core::gp::GpState;
use bq_core::integrands::{make_constant, make_synthetic, Integrand, NoisyOracle, WeightDensity};
use bq_core::kernel::KernelSpec;
use bq_core::oracle::{integrate, integrate_box, OracleConfig};
use bq_core::quadrature::{
    integrate_posterior_mean, run_mc, run_mvs, run_mvs_mc, select_max_variance, GpConfig,
    StrategyConfig,
};
use bq_core::rng::{label_key, stream};

fn oracle(f: &Integrand, sigma: f64, seed: u64) -> NoisyOracle<'_> {
    NoisyOracle::new(f, sigma, stream(seed, &[label_key("noise")])).unwrap()
}

#[test]
fn mc_variance_matches_sigma_sq_over_t() {
    let f = make_constant(1, 0.7).unwrap();
    let w = WeightDensity::uniform(1);
    let (sigma, t, runs) = (0.5, 40, 1000);
    let est: Vec<f64> = (0..runs)
        .map(|r| {
            let mut o = oracle(&f, sigma, r);
            run_mc(&mut o, &w, t, &[], &mut stream(r, &[label_key("x")])).unwrap().estimate
        })
        .collect();
    let mean = est.iter().sum::<f64>() / runs as f64;
    let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    let want = sigma * sigma / t as f64;
    // the sample variance of normals has standard error var·√(2/(n−1))
    let se = want * (2.0 / (runs - 1) as f64).sqrt();
    assert!((var - want).abs() <= 3.0 * se, "{var} vs {want}");

    let mut o = oracle(&f, 0.0, 1);
    let tr = run_mc(&mut o, &w, 1, &[], &mut stream(1, &[])).unwrap();
    assert_eq!(tr.estimate, 0.7);
    assert_eq!(tr.estimate, tr.observations[0]);
}

#[test]
fn argmax_moves_away_from_observed_candidate() {
    let spec = KernelSpec::new(1.5, 0.05, 1.0).unwrap();
    let cands = vec![vec![0.1], vec![0.5], vec![0.9]];
    let prior = GpState::new(spec, 1e-6, 1).unwrap();
    assert_eq!(select_max_variance(&prior, &cands, 1.0).unwrap(), 0);
    for j in 0..3 {
        let gp = prior.extend(cands[j].clone(), None).unwrap();
        assert_ne!(select_max_variance(&gp, &cands, 1.0).unwrap(), j);
    }
    let gp = prior.extend(vec![0.12], None).unwrap();
    let vars: Vec<f64> = cands.iter().map(|c| gp.posterior_var(c).unwrap()).collect();
    let max = vars.iter().cloned().fold(0.0, f64::max);
    let i = select_max_variance(&gp, &cands, 0.5).unwrap();
    assert!(vars[i].sqrt() >= 0.5 * max.sqrt());
}

#[test]
fn noiseless_mvs_recovers_expansion_integral() {
    let k = KernelSpec::new(1.5, 0.2, 1.0).unwrap();
    let f = make_synthetic(1, 5, k, &mut stream(2, &[label_key("f")])).unwrap();
    let w = WeightDensity::uniform(1);
    let truth = integrate(&f, &w, &OracleConfig::default()).unwrap().value;
    let gp = GpConfig {
        kernel: k,
        lambda: Some(1e-10),
    };
    let mut o = oracle(&f, 0.0, 3);
    let tr = run_mvs(&mut o, &w, &StrategyConfig::mvs(40), &gp, None, &mut stream(3, &[])).unwrap();
    assert!((tr.estimate - truth).abs() <= 1e-4, "{} vs {truth}", tr.estimate);

    let zero = make_constant(1, 0.0).unwrap();
    let mut o = oracle(&zero, 0.0, 3);
    let tr = run_mvs(&mut o, &w, &StrategyConfig::mvs(10), &gp, None, &mut stream(3, &[])).unwrap();
    assert_eq!(tr.estimate, 0.0);
}

#[test]
fn two_batch_error_decomposes_into_residual_error() {
    let k = KernelSpec::new(1.5, 0.1, 2.0).unwrap();
    let f = make_synthetic(1, 30, k, &mut stream(4, &[label_key("f")])).unwrap();
    let w = WeightDensity::uniform(1);
    let cfg = OracleConfig::default();
    let truth = integrate(&f, &w, &cfg).unwrap().value;
    for seed in 0..5 {
        let mut o = oracle(&f, 0.05, seed);
        let sc = StrategyConfig::mvs_mc(60, 0.5);
        let tr = run_mvs_mc(&mut o, &w, &sc, &GpConfig::new(k), None, &mut stream(seed, &[])).unwrap();
        assert_eq!(tr.estimate, tr.initial_estimate + tr.residual);
        let r = truth - tr.initial_estimate;
        let lhs = tr.estimate - truth;
        let rhs = tr.residual - r;
        assert!((lhs - rhs).abs() < 1e-14, "{lhs} vs {rhs}");
        // Î₁ against direct quadrature of the batch-1 posterior mean
        let n1 = tr.batches.iter().filter(|b| **b == bq_core::quadrature::Batch::Mvs).count();
        let xs: Vec<Vec<f64>> = tr
            .points
            .iter()
            .zip(&tr.batches)
            .filter(|(_, b)| **b == bq_core::quadrature::Batch::Mvs)
            .map(|(x, _)| x.clone())
            .collect();
        let ys: Vec<f64> = tr
            .observations
            .iter()
            .zip(&tr.batches)
            .filter(|(_, b)| **b == bq_core::quadrature::Batch::Mvs)
            .map(|(y, _)| *y)
            .collect();
        assert_eq!(n1, 30);
        let gp = GpState::from_observations(k, tr.lambda.unwrap(), 1, xs, Some(ys)).unwrap();
        let mu = |x: &[f64]| gp.posterior_mean(x).unwrap();
        let direct = integrate_box(&[0.0], &[1.0], &mu, &cfg).unwrap().value;
        assert!((direct - tr.initial_estimate).abs() < 1e-8);
    }
}

#[test]
fn near_flat_weight_matches_uniform_path() {
    let spec = KernelSpec::new(1.5, 0.3, 1.0).unwrap();
    let gp = GpState::from_observations(
        spec,
        1e-4,
        2,
        vec![vec![0.2, 0.3], vec![0.7, 0.6], vec![0.5, 0.9]],
        Some(vec![1.0, -0.5, 0.25]),
    )
    .unwrap();
    let uniform = integrate_posterior_mean(&gp, &WeightDensity::uniform(2)).unwrap();
    let flat = WeightDensity::truncated_gaussian(&[0.5, 0.5], &[1e4, 1e4]).unwrap();
    let other = integrate_posterior_mean(&gp, &flat).unwrap();
    assert!((uniform - other).abs() < 1e-4, "{uniform} vs {other}");
    // against tensor quadrature of μ
    let mu = |x: &[f64]| gp.posterior_mean(x).unwrap();
    let direct = integrate_box(&[0.0, 0.0], &[1.0, 1.0], &mu, &OracleConfig::default()).unwrap();
    assert!((uniform - direct.value).abs() < 1e-4);
}

#[test]
fn running_estimates_end_at_final_estimate() {
    let k = KernelSpec::new(1.5, 0.1, 1.0).unwrap();
    let f = make_synthetic(1, 10, k, &mut stream(5, &[])).unwrap();
    let w = WeightDensity::uniform(1);
    for interleave in [false, true] {
        let mut sc = StrategyConfig::mvs_mc(50, 0.5).with_checkpoints(vec![5, 10, 25]);
        sc.interleave = interleave;
        let mut o = oracle(&f, 0.1, 1);
        let tr = run_mvs_mc(&mut o, &w, &sc, &GpConfig::new(k), None, &mut stream(1, &[])).unwrap();
        let last = tr.checkpoints.last().unwrap();
        assert_eq!(last.0, 50);
        assert_eq!(last.1, tr.estimate);
        assert_eq!(tr.points.len(), 50);
    }
}
