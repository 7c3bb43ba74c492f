//! Kernel means `z(x) = ∫ k(x, u) p(u) du`, so that `∫ p μ_t = αᵀ z`.

use crate::integrands::WeightDensity;
use crate::kernel::KernelSpec;
use crate::oracle::adaptive_gk;
use crate::qmc::Kronecker;

/// Number of quasi-random points used when `d > 1`.
pub const QMC_POINTS: usize = 100_000;

pub(crate) enum KernelMean {
    /// `d = 1`, uniform weight, `ν ∈ {1/2, 3/2, 5/2}`.
    ClosedForm,
    /// `d = 1`: adaptive quadrature split at the kernel centre.
    Adaptive(WeightDensity),
    /// Tent-transformed Kronecker points with their density values.
    Qmc { points: Vec<f64>, density: Vec<f64>, d: usize },
}

fn is_half_integer_closed(nu: f64) -> bool {
    nu == 0.5 || nu == 1.5 || nu == 2.5
}

// ∫₀^L ρ(r) dr for the closed-form correlation, with a = √(2ν)/l.
fn radial_primitive(nu: f64, a: f64, len: f64) -> f64 {
    let z = a * len;
    let e = (-z).exp();
    let v = if nu == 0.5 {
        1.0 - e
    } else if nu == 1.5 {
        2.0 - (2.0 + z) * e
    } else {
        8.0 / 3.0 - (8.0 / 3.0 + 5.0 * z / 3.0 + z * z / 3.0) * e
    };
    v / a
}

impl KernelMean {
    pub(crate) fn new(spec: &KernelSpec, weight: &WeightDensity) -> Self {
        let d = weight.dim();
        if d == 1 {
            if weight.is_uniform() && is_half_integer_closed(spec.nu) {
                KernelMean::ClosedForm
            } else {
                KernelMean::Adaptive(weight.clone())
            }
        } else {
            let seq = Kronecker::new(d).with_baker();
            let mut points = vec![0.0; QMC_POINTS * d];
            let mut density = Vec::with_capacity(QMC_POINTS);
            for (n, chunk) in points.chunks_mut(d).enumerate() {
                seq.point_into(n, chunk);
                density.push(weight.density(chunk));
            }
            KernelMean::Qmc { points, density, d }
        }
    }

    pub(crate) fn eval(&self, spec: &KernelSpec, x: &[f64]) -> f64 {
        match self {
            KernelMean::ClosedForm => {
                let a = (2.0 * spec.nu).sqrt() / spec.lengthscale;
                spec.scale * (radial_primitive(spec.nu, a, x[0]) + radial_primitive(spec.nu, a, 1.0 - x[0]))
            }
            KernelMean::Adaptive(w) => {
                let c = x[0];
                let g = |u: f64| spec.eval_radius((u - c).abs()) * w.density(&[u]);
                let left = adaptive_gk(g, 0.0, c, 1e-11, 20_000).value;
                let right = adaptive_gk(g, c, 1.0, 1e-11, 20_000).value;
                left + right
            }
            KernelMean::Qmc { points, density, d } => {
                let sum: f64 = points
                    .chunks(*d)
                    .zip(density)
                    .map(|(u, p)| spec.eval_unchecked(x, u) * p)
                    .sum();
                sum / density.len() as f64
            }
        }
    }
}
