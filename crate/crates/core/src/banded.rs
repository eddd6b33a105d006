//! Pentadiagonal matrices and their direct solution by banded Gaussian
//! elimination with partial pivoting.

use crate::error::{domain, Error, Result};

/// Half bandwidth.
const BAND: usize = 2;
/// Row width of the elimination workspace: pivoting lets the upper band grow
/// to `2 * BAND`.
const WORK: usize = 3 * BAND + 1;

/// Square matrix with nonzeros only on the diagonals `-2..=2`.
/// `rows[i][j]` holds entry `(i, i + j - 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PentaMatrix {
    rows: Vec<[f64; 2 * BAND + 1]>,
}

impl PentaMatrix {
    pub fn zeros(n: usize) -> Self {
        PentaMatrix {
            rows: vec![[0.0; 2 * BAND + 1]; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for row in &mut m.rows {
            row[BAND] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.dim();
        if i >= n || j >= n || i.abs_diff(j) > BAND {
            return None;
        }
        Some(j + BAND - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.rows[i][k])
    }

    /// Adds `value` to entry `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) lies outside the pentadiagonal band"));
        self.rows[i][k] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) lies outside the pentadiagonal band"));
        self.rows[i][k] = value;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim());
        let n = self.dim();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(BAND);
                let hi = (i + BAND).min(n - 1);
                (lo..=hi).map(|j| self.rows[i][j + BAND - i] * x[j]).sum()
            })
            .collect()
    }

    /// Solves `self * x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        // work[i][k] holds column i + k - BAND of the row currently at position i
        let mut work: Vec<[f64; WORK]> = self
            .rows
            .iter()
            .map(|r| {
                let mut w = [0.0; WORK];
                w[..2 * BAND + 1].copy_from_slice(r);
                w
            })
            .collect();
        let mut b = rhs.to_vec();
        let col = |i: usize, j: usize| j + BAND - i;

        for k in 0..n {
            let last = (k + BAND).min(n - 1);
            let pivot_row = (k..=last)
                .max_by(|&p, &q| {
                    work[p][col(p, k)]
                        .abs()
                        .total_cmp(&work[q][col(q, k)].abs())
                })
                .expect("non-empty pivot window");
            let pivot = work[pivot_row][col(pivot_row, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular { column: k });
            }
            let right = (k + 2 * BAND).min(n - 1);
            if pivot_row != k {
                for j in k..=right {
                    let a = work[k][col(k, j)];
                    let c = work[pivot_row][col(pivot_row, j)];
                    work[k][col(k, j)] = c;
                    work[pivot_row][col(pivot_row, j)] = a;
                }
                b.swap(k, pivot_row);
            }
            for r in k + 1..=last {
                let factor = work[r][col(r, k)] / pivot;
                if factor == 0.0 {
                    continue;
                }
                work[r][col(r, k)] = 0.0;
                for j in k + 1..=right {
                    work[r][col(r, j)] -= factor * work[k][col(k, j)];
                }
                b[r] -= factor * b[k];
            }
        }

        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let right = (k + 2 * BAND).min(n - 1);
            let s: f64 = (k + 1..=right).map(|j| work[k][col(k, j)] * x[j]).sum();
            x[k] = (b[k] - s) / work[k][BAND];
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(x)
    }
}

/// Matrix and right-hand side of one implicit solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: PentaMatrix,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn new(matrix: PentaMatrix, rhs: Vec<f64>) -> Result<Self> {
        if matrix.dim() != rhs.len() {
            return Err(domain("rhs", "length differs from matrix dimension"));
        }
        Ok(LinearSystem { matrix, rhs })
    }

    /// `max |A x - rhs|`.
    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        self.matrix
            .matvec(x)
            .iter()
            .zip(&self.rhs)
            .map(|(ax, b)| (ax - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn solve_banded(system: &LinearSystem) -> Result<Vec<f64>> {
    system.matrix.solve(&system.rhs)
}
