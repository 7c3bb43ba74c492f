//! Matérn-ν kernel.
//!
//! `k(r) = scale · 2^{1−ν}/Γ(ν) · u^ν K_ν(u)` with `u = √(2ν) r / l`. The
//! half-integer orders 1/2, 3/2 and 5/2 use their exact closed forms; every
//! other order goes through [`bessel::bessel_k`].

pub mod bessel;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::Matrix;

/// Parameters of a Matérn-ν kernel with an output-scale multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub nu: f64,
    pub lengthscale: f64,
    pub scale: f64,
}

/// Sobolev smoothness bookkeeping: `s = ν + d/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothnessInfo {
    pub d: usize,
    pub s: f64,
    pub s_is_integer: bool,
}

impl SmoothnessInfo {
    pub fn new(nu: f64, d: usize) -> Self {
        let s = nu + d as f64 / 2.0;
        let two_nu = 2.0 * nu;
        let s_is_integer =
            two_nu.fract() == 0.0 && ((two_nu as i64) + d as i64) % 2 == 0 && s > 0.0;
        SmoothnessInfo { d, s, s_is_integer }
    }
}

impl KernelSpec {
    pub fn new(nu: f64, lengthscale: f64, scale: f64) -> Result<Self> {
        let spec = KernelSpec {
            nu,
            lengthscale,
            scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Matérn-3/2 with the given lengthscale and scale.
    pub fn matern32(lengthscale: f64, scale: f64) -> Result<Self> {
        Self::new(1.5, lengthscale, scale)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.nu) {
            return Err(Error::InvalidKernel(format!("nu must be > 0, got {}", self.nu)));
        }
        if !ok(self.lengthscale) {
            return Err(Error::InvalidKernel(format!(
                "lengthscale must be > 0, got {}",
                self.lengthscale
            )));
        }
        if !ok(self.scale) {
            return Err(Error::InvalidKernel(format!(
                "scale must be > 0, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    pub fn smoothness(&self, d: usize) -> SmoothnessInfo {
        SmoothnessInfo::new(self.nu, d)
    }

    /// Kernel value as a function of distance `r ≥ 0`.
    #[inline]
    pub fn eval_radius(&self, r: f64) -> f64 {
        self.scale * correlation(self.nu, r / self.lengthscale, true)
    }

    /// Same as [`eval_radius`](Self::eval_radius) but always through the Bessel path.
    pub fn eval_radius_bessel(&self, r: f64) -> f64 {
        self.scale * correlation(self.nu, r / self.lengthscale, false)
    }

    /// Kernel value without dimension or finiteness checks.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        self.eval_radius(distance(x, x2))
    }
}

#[inline]
pub(crate) fn distance(x: &[f64], x2: &[f64]) -> f64 {
    x.iter()
        .zip(x2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Matérn correlation at scaled distance `rho = r / l`.
fn correlation(nu: f64, rho: f64, closed_forms: bool) -> f64 {
    if rho == 0.0 {
        return 1.0;
    }
    if closed_forms {
        if nu == 0.5 {
            return (-rho).exp();
        }
        if nu == 1.5 {
            let u = 3f64.sqrt() * rho;
            return (1.0 + u) * (-u).exp();
        }
        if nu == 2.5 {
            let u = 5f64.sqrt() * rho;
            return (1.0 + u + u * u / 3.0) * (-u).exp();
        }
    }
    let u = (2.0 * nu).sqrt() * rho;
    if u < 1e-100 {
        return 1.0;
    }
    let k = bessel::bessel_k(nu, u);
    if k == 0.0 {
        return 0.0;
    }
    let log_val = (1.0 - nu) * std::f64::consts::LN_2 - libm::lgamma(nu) + nu * u.ln() + k.ln();
    log_val.exp().min(1.0)
}

/// `scale · Matérn_ν(‖x − x2‖)`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    check_dim(x.len(), x2.len())?;
    check_finite(x, "kernel input")?;
    check_finite(x2, "kernel input")?;
    Ok(spec.eval_unchecked(x, x2))
}

/// Dense symmetric Gram matrix over `points`.
pub fn kernel_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<Matrix> {
    let n = points.len();
    if let Some(first) = points.first() {
        for p in points {
            check_dim(first.len(), p.len())?;
            check_finite(p, "kernel input")?;
        }
    }
    let mut k = Matrix::zeros(n);
    for i in 0..n {
        k[(i, i)] = spec.scale;
        for j in 0..i {
            let v = spec.eval_unchecked(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `[k(points[i], x)]_i`.
pub fn kernel_cross(spec: &KernelSpec, points: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>> {
    check_finite(x, "kernel input")?;
    points
        .iter()
        .map(|p| {
            check_dim(x.len(), p.len())?;
            Ok(spec.eval_unchecked(p, x))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(nu: f64, l: f64, s: f64) -> KernelSpec {
        KernelSpec::new(nu, l, s).unwrap()
    }

    #[test]
    fn value_at_zero_distance_is_scale() {
        let k = spec(1.5, 1.0, 1.0);
        assert_eq!(kernel_eval(&k, &[0.3, 0.2], &[0.3, 0.2]).unwrap(), 1.0);
        assert_eq!(spec(2.0, 0.1, 3.5).eval_radius(0.0), 3.5);
    }

    #[test]
    fn closed_form_values() {
        let k = spec(0.5, 1.0, 1.0);
        let v = kernel_eval(&k, &[0.0], &[1.0]).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);

        let k = spec(1.5, 1.0, 2.0);
        let v = kernel_eval(&k, &[0.0], &[1.0]).unwrap();
        let s3 = 3f64.sqrt();
        assert!((v - 2.0 * (1.0 + s3) * (-s3).exp()).abs() < 1e-15);
        // and the Bessel path gives the same thing
        assert!((k.eval_radius_bessel(1.0) / v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = spec(1.5, 1.0, 1.0);
        assert!(matches!(
            kernel_eval(&k, &[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            kernel_eval(&k, &[f64::NAN], &[0.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(KernelSpec::new(0.0, 1.0, 1.0).is_err());
        assert!(KernelSpec::new(1.5, -1.0, 1.0).is_err());
        assert!(KernelSpec::new(1.5, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn matrix_and_cross() {
        let k = spec(0.5, 1.0, 1.0);
        assert_eq!(kernel_matrix(&k, &[]).unwrap().n(), 0);
        let one = kernel_matrix(&k, &[vec![0.4]]).unwrap();
        assert_eq!(one[(0, 0)], 1.0);

        let two = kernel_matrix(&spec(1.5, 0.2, 3.0), &[vec![0.4], vec![0.4]]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(two[(i, j)], 3.0);
            }
        }

        let pts = vec![vec![0.0], vec![0.5], vec![1.0]];
        let m = kernel_matrix(&k, &pts).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = (-(pts[i][0] - pts[j][0] as f64).abs()).exp();
                assert!((m[(i, j)] - want).abs() < 1e-15);
            }
        }

        assert!(kernel_cross(&k, &[], &[0.5]).unwrap().is_empty());
        assert_eq!(kernel_cross(&k, &[vec![0.5]], &[0.5]).unwrap(), vec![1.0]);
        let c = kernel_cross(&k, &[vec![0.0], vec![1.0]], &[0.5]).unwrap();
        assert!((c[0] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((c[1] - (-0.5f64).exp()).abs() < 1e-15);
        assert!(kernel_cross(&k, &[vec![0.0, 0.0]], &[0.5]).is_err());
    }

    #[test]
    fn smoothness_bookkeeping() {
        let s = SmoothnessInfo::new(1.5, 1);
        assert_eq!(s.s, 2.0);
        assert!(s.s_is_integer);
        assert!(!SmoothnessInfo::new(1.5, 2).s_is_integer);
        assert!(SmoothnessInfo::new(1.0, 2).s_is_integer);
        assert!(!SmoothnessInfo::new(1.2, 1).s_is_integer);
        assert_eq!(SmoothnessInfo::new(2.5, 3).s, 4.0);
    }

    #[test]
    fn closed_forms_agree_with_bessel_path_over_random_radii() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &nu in &[0.5, 1.5, 2.5] {
            let k = spec(nu, 0.37, 1.7);
            for _ in 0..100 {
                let r = rng.random_range(1e-9..=5.0 * k.lengthscale);
                let a = k.eval_radius(r);
                let b = k.eval_radius_bessel(r);
                assert!((a / b - 1.0).abs() < 1e-8, "nu={nu} r={r}: {a} vs {b}");
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_decay(nu in prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.3]),
                          l in 0.01f64..2.0, r1 in 0.0f64..3.0, dr in 0.0f64..3.0) {
            let k = spec(nu, l, 1.3);
            prop_assert!(k.eval_radius(r1) + 1e-15 >= k.eval_radius(r1 + dr));
        }

        #[test]
        fn symmetric(a in prop::collection::vec(-2.0f64..2.0, 3), b in prop::collection::vec(-2.0f64..2.0, 3)) {
            let k = spec(2.0, 0.7, 1.0);
            prop_assert_eq!(kernel_eval(&k, &a, &b).unwrap(), kernel_eval(&k, &b, &a).unwrap());
        }
    }
}
