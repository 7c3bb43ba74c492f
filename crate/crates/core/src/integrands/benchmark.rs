//! Standard optimization test functions, rescaled so the domain is `[0,1]^d`.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    Ackley,
    Alpine1,
    GramacyLee,
    Griewank,
    Rastrigin,
    Keane,
}

impl Benchmark {
    pub const ALL: [Benchmark; 6] = [
        Benchmark::Ackley,
        Benchmark::Alpine1,
        Benchmark::GramacyLee,
        Benchmark::Griewank,
        Benchmark::Rastrigin,
        Benchmark::Keane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Ackley => "ackley",
            Benchmark::Alpine1 => "alpine1",
            Benchmark::GramacyLee => "gramacy-lee",
            Benchmark::Griewank => "griewank",
            Benchmark::Rastrigin => "rastrigin",
            Benchmark::Keane => "keane",
        }
    }

    /// Native per-axis domain `[lo, hi]`.
    pub fn domain(self) -> (f64, f64) {
        match self {
            Benchmark::Ackley => (-32.768, 32.768),
            Benchmark::Alpine1 => (-10.0, 10.0),
            Benchmark::GramacyLee => (0.5, 2.5),
            Benchmark::Griewank => (-600.0, 600.0),
            Benchmark::Rastrigin => (-5.12, 5.12),
            Benchmark::Keane => (0.0, 10.0),
        }
    }

    /// Dimension restriction, if any.
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            Benchmark::GramacyLee => Some(1),
            Benchmark::Keane => Some(2),
            _ => None,
        }
    }

    /// Evaluates at a point of the native domain.
    pub fn eval_native(self, z: &[f64]) -> f64 {
        let d = z.len() as f64;
        match self {
            Benchmark::Ackley => {
                let sq = z.iter().map(|v| v * v).sum::<f64>() / d;
                let cs = z.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
                -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
            }
            Benchmark::Alpine1 => z.iter().map(|v| (v * v.sin() + 0.1 * v).abs()).sum(),
            Benchmark::GramacyLee => {
                let x = z[0];
                (10.0 * PI * x).sin() / (2.0 * x) + (x - 1.0).powi(4)
            }
            Benchmark::Griewank => {
                let s = z.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let p: f64 = z
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                    .product();
                s - p + 1.0
            }
            Benchmark::Rastrigin => {
                10.0 * d
                    + z.iter()
                        .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
                        .sum::<f64>()
            }
            Benchmark::Keane => {
                let c4: f64 = z.iter().map(|v| v.cos().powi(4)).sum();
                let c2: f64 = z.iter().map(|v| v.cos().powi(2)).product();
                let den: f64 = z
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (i + 1) as f64 * v * v)
                    .sum::<f64>()
                    .sqrt();
                if den == 0.0 {
                    0.0
                } else {
                    -(c4 - 2.0 * c2).abs() / den
                }
            }
        }
    }

    /// Evaluates at `x ∈ [0,1]^d`.
    pub fn eval_unit(self, x: &[f64]) -> f64 {
        let (lo, hi) = self.domain();
        let z: Vec<f64> = x.iter().map(|v| lo + (hi - lo) * v).collect();
        self.eval_native(&z)
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "ackley" => Benchmark::Ackley,
            "alpine" | "alpine1" => Benchmark::Alpine1,
            "gramacylee" => Benchmark::GramacyLee,
            "griewank" => Benchmark::Griewank,
            "rastrigin" => Benchmark::Rastrigin,
            "keane" | "bump" => Benchmark::Keane,
            _ => return Err(Error::UnknownBenchmark(s.to_string())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizers() {
        for d in 1..=4 {
            let c = vec![0.5; d];
            assert!(Benchmark::Ackley.eval_unit(&c).abs() < 1e-14);
            assert!(Benchmark::Griewank.eval_unit(&c).abs() < 1e-14);
            assert!(Benchmark::Rastrigin.eval_unit(&c).abs() < 1e-12);
            assert!(Benchmark::Alpine1.eval_unit(&c).abs() < 1e-14);
        }
    }

    #[test]
    fn hand_values() {
        // Ackley at z = (1, 0): sqrt(1/2), cos terms (1 + 1)/2.
        let a = -20.0 * (-0.2 * 0.5f64.sqrt()).exp() - 1f64.exp() + 20.0 + E;
        assert!((Benchmark::Ackley.eval_native(&[1.0, 0.0]) - a).abs() < 1e-13);
        // Rastrigin at integers is the sum of squares.
        assert!((Benchmark::Rastrigin.eval_native(&[1.0, -2.0]) - 5.0).abs() < 1e-12);
        // Gramacy-Lee at x = 1: sin(10π)/2 ≈ 0.
        assert!(Benchmark::GramacyLee.eval_native(&[1.0]).abs() < 1e-14);
        // Gramacy-Lee at x = 0.55 from the left domain edge.
        let g = (5.5 * PI).sin() / 1.1 + 0.45f64.powi(4);
        assert!((Benchmark::GramacyLee.eval_unit(&[0.025]) - g).abs() < 1e-13);
        // Alpine1 at z = π/2: |π/2 + 0.1·π/2|.
        let v = 1.1 * PI / 2.0;
        assert!((Benchmark::Alpine1.eval_native(&[PI / 2.0]) - v).abs() < 1e-14);
        // Griewank at z = (π, 0): π²/4000 − cos(π)·cos(0) + 1.
        let gw = PI * PI / 4000.0 + 2.0;
        assert!((Benchmark::Griewank.eval_native(&[PI, 0.0]) - gw).abs() < 1e-13);
        // Keane at (1, 0): -(cos⁴1 + 1 − 2cos²1)/1.
        let c = 1f64.cos();
        let k = -((c.powi(4) + 1.0) - 2.0 * c * c).abs();
        assert!((Benchmark::Keane.eval_native(&[1.0, 0.0]) - k).abs() < 1e-14);
        assert_eq!(Benchmark::Keane.eval_native(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn names_round_trip() {
        for b in Benchmark::ALL {
            assert_eq!(b.name().parse::<Benchmark>().unwrap(), b);
        }
        assert!("Alpine".parse::<Benchmark>().is_ok());
        assert!("rosenbrock".parse::<Benchmark>().is_err());
    }
}
