//! Low-discrepancy point sets on `[0,1]^d`.
//!
//! Uses the additive recurrence `x_n = frac(shift + n·α)` with
//! `α_j = φ_d^{−(j+1)}`, where `φ_d` is the positive root of
//! `x^{d+1} = x + 1` (the golden ratio when `d = 1`). Random shifts give
//! independent randomizations for error estimation. The optional baker's
//! (tent) transform `x ↦ 1 − |2x − 1|` keeps the uniform measure and makes the
//! rule converge much faster on smooth non-periodic integrands.

use rand::Rng;

#[derive(Clone, Debug)]
pub struct Kronecker {
    alpha: Vec<f64>,
    shift: Vec<f64>,
    baker: bool,
}

fn generalized_golden_ratio(d: usize) -> f64 {
    let p = (d + 1) as f64;
    let mut x = 1.5f64;
    for _ in 0..100 {
        let f = x.powf(p) - x - 1.0;
        let df = p * x.powf(p - 1.0) - 1.0;
        let step = f / df;
        x -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    x
}

impl Kronecker {
    /// The unshifted-by-randomness sequence (shift 1/2 in every axis).
    pub fn new(d: usize) -> Self {
        Self::with_shift(vec![0.5; d])
    }

    pub fn with_shift(shift: Vec<f64>) -> Self {
        let d = shift.len();
        let phi = generalized_golden_ratio(d);
        let alpha = (1..=d).map(|j| phi.powi(-(j as i32)).fract()).collect();
        Kronecker {
            alpha,
            shift,
            baker: false,
        }
    }

    /// Applies the tent transform to every generated coordinate.
    pub fn with_baker(mut self) -> Self {
        self.baker = true;
        self
    }

    pub fn randomized<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self::with_shift((0..d).map(|_| rng.random::<f64>()).collect())
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    #[inline]
    pub fn point_into(&self, n: usize, out: &mut [f64]) {
        let nf = n as f64;
        for ((o, a), s) in out.iter_mut().zip(&self.alpha).zip(&self.shift) {
            // n·α is reduced before adding the shift to keep precision for large n.
            let v = ((nf * a).fract() + s).fract();
            *o = if self.baker { 1.0 - (2.0 * v - 1.0).abs() } else { v };
        }
    }

    pub fn point(&self, n: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.point_into(n, &mut p);
        p
    }

    pub fn points(&self, count: usize) -> Vec<Vec<f64>> {
        (0..count).map(|n| self.point(n)).collect()
    }
}
