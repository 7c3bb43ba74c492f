use bq_core::gp::{
    confidence_bounds, fit_hyperparams, log_marginal_likelihood, ConfidenceBand, FitBounds,
    GpState,
};
use bq_core::integrands::{make_synthetic, NoisyOracle};
use bq_core::kernel::{kernel_eval, kernel_matrix, KernelSpec};
use bq_core::rng::{label_key, stream};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn point_set(d: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, d), 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_matrix_is_positive_semidefinite(
        pts in point_set(2, 20),
        nu in prop::sample::select(vec![0.5, 1.5, 2.5, 0.8, 2.2]),
        l in 0.05f64..2.0,
        scale in 0.1f64..10.0,
    ) {
        let spec = KernelSpec::new(nu, l, scale).unwrap();
        let k = kernel_matrix(&spec, &pts).unwrap();
        let n = pts.len();
        let m = DMatrix::from_fn(n, n, |i, j| k.row(i)[j]);
        let min_eig = m.symmetric_eigenvalues().min();
        prop_assert!(min_eig >= -1e-8 * scale, "smallest eigenvalue {min_eig}");
    }

    #[test]
    fn incremental_updates_match_rebuild(
        pts in point_set(2, 50),
        seed in any::<u64>(),
        lambda in prop::sample::select(vec![1e-4, 1e-2, 0.25]),
    ) {
        let spec = KernelSpec::new(1.5, 0.2, 2.0).unwrap();
        let mut rng = stream(seed, &[]);
        let ys: Vec<f64> = pts.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        let queries: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random(), rng.random()]).collect();
        let mut inc = GpState::new(spec, lambda, 2).unwrap();
        for (x, &y) in pts.iter().zip(&ys) {
            inc = inc.extend(x.clone(), Some(y)).unwrap();
        }
        let full = GpState::from_observations(spec, lambda, 2, pts.clone(), Some(ys)).unwrap();
        for q in &queries {
            let (a, b) = (inc.posterior_mean(q).unwrap(), full.posterior_mean(q).unwrap());
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1e-12), "mean {a} vs {b}");
            let (a, b) = (inc.posterior_var(q).unwrap(), full.posterior_var(q).unwrap());
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1e-12), "var {a} vs {b}");
        }
    }

    #[test]
    fn posterior_std_never_increases(pts in point_set(1, 40)) {
        let spec = KernelSpec::new(2.5, 0.1, 1.0).unwrap();
        let grid: Vec<Vec<f64>> = (0..=50).map(|i| vec![i as f64 / 50.0]).collect();
        let mut gp = GpState::new(spec, 1e-6, 1).unwrap();
        let mut prev: Vec<f64> = grid.iter().map(|x| gp.posterior_std(x).unwrap()).collect();
        for x in pts {
            gp = gp.extend(x, None).unwrap();
            for (g, p) in grid.iter().zip(prev.iter_mut()) {
                let s = gp.posterior_std(g).unwrap();
                prop_assert!(s <= *p + 1e-10);
                prop_assert!((0.0..=1.0 + 1e-10).contains(&(s * s)));
                *p = s;
            }
        }
    }
}

// Direct O(n³) evaluation of −½yᵀK⁻¹y − ½log|K| − (n/2)log 2π with K the
// regularized Gram matrix.
fn lml_direct(spec: &KernelSpec, lambda: f64, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let n = xs.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        kernel_eval(spec, &xs[i], &xs[j]).unwrap() + if i == j { lambda } else { 0.0 }
    });
    let y = nalgebra::DVector::from_column_slice(ys);
    let alpha = k.clone().lu().solve(&y).unwrap();
    -0.5 * y.dot(&alpha) - 0.5 * k.determinant().ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

#[test]
fn log_likelihood_matches_dense_evaluation() {
    let mut rng = stream(3, &[]);
    let xs: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random(), rng.random()]).collect();
    let ys: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
    for (nu, l, s) in [(0.5, 0.3, 1.0), (1.5, 0.1, 4.0), (2.5, 0.7, 0.5), (1.1, 0.4, 2.0)] {
        let spec = KernelSpec::new(nu, l, s).unwrap();
        let got = log_marginal_likelihood(&spec, 0.01, &xs, &ys).unwrap();
        let want = lml_direct(&spec, 0.01, &xs, &ys);
        assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn fitted_hyperparameters_beat_the_default_corner() {
    let truth = KernelSpec::new(1.5, 0.2, 3.0).unwrap();
    let mut rng = stream(11, &[label_key("fit")]);
    let f = make_synthetic(1, 30, truth, &mut rng).unwrap();
    let xs: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random()]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| f.value(x)).collect();
    let bounds = FitBounds::default();
    let fit = fit_hyperparams(&xs, &ys, 1.5, 1e-4, &bounds).unwrap();
    let at = |s: &KernelSpec| log_marginal_likelihood(s, 1e-4, &xs, &ys).unwrap();
    for l in [0.01, 0.1, 1.0] {
        for s in [0.01, 1.0, 100.0] {
            let other = KernelSpec::new(1.5, l, s).unwrap();
            assert!(at(&fit) >= at(&other) - 1e-9, "fit {fit:?} loses to l={l} s={s}");
        }
    }
    assert!(fit.lengthscale >= 0.01 && fit.lengthscale <= 1.0);
    assert!(fit.scale >= 0.01 && fit.scale <= 100.0);
}

#[test]
fn confidence_band_covers_rkhs_function() {
    let kernel = KernelSpec::new(1.5, 0.15, 1.0).unwrap();
    let mut rng = stream(5, &[label_key("band")]);
    let f = make_synthetic(1, 8, kernel, &mut rng).unwrap();
    let b = f.as_expansion().unwrap().rkhs_norm().unwrap();
    let sigma = 0.05;
    let lambda = sigma * sigma;
    let band = ConfidenceBand::new(b, sigma, 0.1, lambda).unwrap();
    let xs: Vec<Vec<f64>> = (0..15).map(|i| vec![(i as f64 + 0.5) / 15.0]).collect();
    let grid: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 39.0]).collect();
    let mut misses = 0;
    for rep in 0..50 {
        let mut o = NoisyOracle::new(&f, sigma, stream(rep, &[label_key("band-noise")])).unwrap();
        let ys = xs.iter().map(|x| o.query(x).unwrap()).collect();
        let gp = GpState::from_observations(kernel, lambda, 1, xs.clone(), Some(ys)).unwrap();
        for x in &grid {
            let (lo, hi) = confidence_bounds(&gp, &band, x).unwrap();
            assert!(lo <= hi);
            if !(lo..=hi).contains(&f.value(x)) {
                misses += 1;
            }
        }
    }
    assert!(misses as f64 <= 0.1 * 50.0 * 40.0, "{misses} misses");
}

#[test]
fn repeated_points_survive_via_jitter() {
    let spec = KernelSpec::new(2.5, 0.5, 1.0).unwrap();
    let mut gp = GpState::new(spec, 1e-14, 1).unwrap();
    for _ in 0..5 {
        gp = gp.extend(vec![0.3], Some(1.0)).unwrap();
    }
    assert!(gp.effective_lambda() >= gp.lambda());
    assert!((gp.posterior_mean(&[0.3]).unwrap() - 1.0).abs() < 1e-3);
}
