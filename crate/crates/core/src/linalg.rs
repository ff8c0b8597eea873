//! Banded LU factorization (no pivoting) for the implicit-Euler system
//! matrix, with forward and transposed solves.

use crate::error::{LabError, Result};

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    // row-major, each row holds columns i-bw ..= i+bw
    band: Vec<f64>,
}

impl BandedLu {
    /// Factors the `n × n` matrix whose nonzero entries are listed per row
    /// as `(column, value)`. All columns must satisfy `|i - j| <= bw`.
    pub fn factor(n: usize, bw: usize, rows: &[Vec<(usize, f64)>]) -> Result<BandedLu> {
        let width = 2 * bw + 1;
        let mut band = vec![0.0; n * width];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                if i.abs_diff(j) > bw {
                    return Err(LabError::Size(format!(
                        "entry ({i}, {j}) outside bandwidth {bw}"
                    )));
                }
                band[i * width + j + bw - i] += v;
            }
        }
        for k in 0..n {
            let pivot = band[k * width + bw];
            if pivot.abs() < 1e-300 || !pivot.is_finite() {
                return Err(LabError::Domain(format!("zero pivot at row {k}")));
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let idx = i * width + k + bw - i;
                let m = band[idx] / pivot;
                if m == 0.0 {
                    continue;
                }
                band[idx] = m;
                for j in k + 1..=last {
                    band[i * width + j + bw - i] -= m * band[k * width + j + bw - k];
                }
            }
        }
        Ok(BandedLu { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.band[i * (2 * self.bw + 1) + j + self.bw - i]
    }

    /// Solves `M x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for j in lo..i {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=hi {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
    }

    /// Solves `Mᵀ x = b` in place.
    pub fn solve_transpose(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        // Uᵀ y = b
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for j in lo..i {
                s -= self.at(j, i) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=hi {
                s -= self.at(j, i) * x[j];
            }
            x[i] = s;
        }
    }
}
