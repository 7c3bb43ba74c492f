//! Dense square matrices and a row-appendable Cholesky factor.

use std::ops::{Index, IndexMut};

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self[(i, i)] += v;
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular `L` with `L Lᵀ = A`, stored packed by rows so that a new
/// row can be appended in `O(n²)` when `A` grows by one row and column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CholeskyFactor {
    n: usize,
    packed: Vec<f64>,
}

/// The pivot was not positive: the extended matrix is not positive definite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NotPositiveDefinite {
    pub pivot: f64,
}

impl CholeskyFactor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(a: &Matrix) -> Result<Self, NotPositiveDefinite> {
        let mut f = CholeskyFactor::new();
        for i in 0..a.n() {
            f.append(&a.row(i)[..i], a[(i, i)])?;
        }
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.packed[i * (i + 1) / 2 + j]
        }
    }

    /// Appends the row for a new last index, given its covariances with the
    /// existing indices and its diagonal entry.
    pub fn append(&mut self, cross: &[f64], diag: f64) -> Result<(), NotPositiveDefinite> {
        assert_eq!(cross.len(), self.n, "cross-covariance length");
        let l = self.solve_lower(cross);
        let pivot = diag - l.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(NotPositiveDefinite { pivot });
        }
        self.packed.extend_from_slice(&l);
        self.packed.push(pivot.sqrt());
        self.n += 1;
        Ok(())
    }

    /// `L⁻¹ b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in 0..self.n {
            let row = self.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// `L⁻ᵀ b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in (0..self.n).rev() {
            x[i] /= self.get(i, i);
            let xi = x[i];
            let row = self.row(i);
            for (xj, lij) in x[..i].iter_mut().zip(&row[..i]) {
                *xj -= lij * xi;
            }
        }
        x
    }

    /// `A⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.get(i, i).ln()).sum::<f64>()
    }

    /// Reconstructs `L Lᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..=i {
                let v: f64 = self.row(i)[..=j]
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> Matrix {
        let mut a = Matrix::zeros(3);
        let vals = [[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = vals[i][j];
            }
        }
        a
    }

    #[test]
    fn factor_reconstructs_and_solves() {
        let a = spd3();
        let f = CholeskyFactor::factor(&a).unwrap();
        let r = f.reconstruct();
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[(i, j)] - a[(i, j)]).abs() < 1e-14);
            }
        }
        let b = [1.0, -2.0, 0.5];
        let x = f.solve(&b);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[(i, j)] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-13);
        }
        // det by cofactor expansion
        let det = 4.0 * (5.0 * 3.0 - 1.0) - 2.0 * (2.0 * 3.0 - 0.4) + 0.4 * (2.0 - 5.0 * 0.4);
        assert!((f.log_det() - f64::ln(det)).abs() < 1e-13);
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = Matrix::zeros(2);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = 2.0;
        a[(1, 0)] = 2.0;
        a[(1, 1)] = 1.0;
        assert!(CholeskyFactor::factor(&a).is_err());
    }
}
