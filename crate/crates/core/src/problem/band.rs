//! Symmetric positive-definite banded storage with an in-place Cholesky
//! factorization. Row `i` stores the entries `L[i][i-bw..=i]` contiguously,
//! so both operands of the inner product in the factorization are unit-stride.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    /// Zeroed `n × n` matrix with `bw` sub-diagonals.
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn offset(&self, row: usize, col: usize) -> usize {
        debug_assert!(col <= row && row - col <= self.bw);
        row * (self.bw + 1) + (col + self.bw - row)
    }

    /// Adds `v` to the symmetric pair `(row, col)`/`(col, row)`.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        let k = self.offset(r, c);
        self.data[k] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[self.offset(r, c)]
        }
    }

    /// Overwrites the lower band with its Cholesky factor `L` (`A = L Lᵀ`).
    ///
    /// A pivot at or below `rel_tol` times the original diagonal entry is
    /// reported as a singular system.
    pub fn factor(&mut self, rel_tol: f64) -> Result<()> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut col = vec![0.0; bw];
        let diag0: Vec<f64> = (0..n).map(|j| self.data[j * w + bw].abs()).collect();
        for j in 0..n {
            let djj = j * w + bw;
            let s = self.data[djj];
            if !(s > rel_tol * diag0[j]) || !s.is_finite() {
                return Err(Error::SingularSystem { dof: j, pivot: s });
            }
            let d = s.sqrt();
            self.data[djj] = d;
            let inv = 1.0 / d;
            let m = bw.min(n - 1 - j);
            // column j below the diagonal, then a rank-1 update of the trailing block
            for t in 0..m {
                let i = j + 1 + t;
                let k = i * w + j + bw - i;
                self.data[k] *= inv;
                col[t] = self.data[k];
            }
            for t in 0..m {
                let i = j + 1 + t;
                let start = i * w + (j + 1) + bw - i;
                let lij = col[t];
                for (a, c) in self.data[start..=start + t].iter_mut().zip(&col[..=t]) {
                    *a -= lij * c;
                }
            }
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = b` in place; requires a prior successful [`factor`](Self::factor).
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            let row = &self.data[i * w..(i + 1) * w];
            let mut s = b[i];
            for k in i0..i {
                s -= row[k + bw - i] * b[k];
            }
            b[i] = s / row[bw];
        }
        for i in (0..n).rev() {
            b[i] /= self.data[i * w + bw];
            let bi = b[i];
            let i0 = i.saturating_sub(bw);
            let row = &self.data[i * w..(i + 1) * w];
            for k in i0..i {
                b[k] -= row[k + bw - i] * bi;
            }
        }
    }
}
