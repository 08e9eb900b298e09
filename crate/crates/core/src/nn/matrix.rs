//! Dense row-major `f64` matrix with the handful of operations the models
//! need. Matmuls parallelize over output rows; every output element is a
//! fixed-order sum, so parallel and sequential runs produce identical bits.

use crate::util::par::parallel_enabled;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Below this many multiply-adds a matmul is not worth fanning out.
const PAR_FLOP_THRESHOLD: usize = 1 << 18;

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Gaussian entries with the given std.
    pub fn randn(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, std.max(f64::MIN_POSITIVE)).unwrap();
        let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn scalar(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "not a 1x1 matrix");
        self.data[0]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|x| x * c)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    /// `self += c * other`, in place.
    pub fn axpy(&mut self, c: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self @ other`
    pub fn matmul_nn(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul_nn inner dim");
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        let run_row = |r: usize, out_row: &mut [f64]| {
            let a_row = &self.data[r * k..(r + 1) * k];
            for (kk, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[kk * n..(kk + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        run_rows(&mut out, m * k * n, run_row);
        out
    }

    /// `self @ other.T`
    pub fn matmul_nt(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_nt inner dim");
        let (m, k, n) = (self.rows, self.cols, other.rows);
        let mut out = Matrix::zeros(m, n);
        let run_row = |r: usize, out_row: &mut [f64]| {
            let a_row = &self.data[r * k..(r + 1) * k];
            for (c, o) in out_row.iter_mut().enumerate() {
                let b_row = &other.data[c * k..(c + 1) * k];
                *o = dot(a_row, b_row);
            }
        };
        run_rows(&mut out, m * k * n, run_row);
        out
    }

    /// `self.T @ other`
    pub fn matmul_tn(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "matmul_tn inner dim");
        let (m, k, n) = (self.cols, self.rows, other.cols);
        let mut out = Matrix::zeros(m, n);
        // Row r of the output gathers column r of self across all k rows;
        // keep the accumulation order fixed (k ascending) per output row.
        let run_row = |r: usize, out_row: &mut [f64]| {
            for kk in 0..k {
                let a = self.data[kk * m + r];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[kk * n..(kk + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        run_rows(&mut out, m * k * n, run_row);
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Drive `run_row` over every output row, in parallel when it pays off.
/// Each row is produced independently with a fixed inner order, so the
/// result does not depend on the schedule.
fn run_rows(out: &mut Matrix, flops: usize, run_row: impl Fn(usize, &mut [f64]) + Sync) {
    let cols = out.cols;
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() && flops >= PAR_FLOP_THRESHOLD && out.rows > 1 {
            use rayon::prelude::*;
            out.data
                .par_chunks_mut(cols)
                .enumerate()
                .for_each(|(r, row)| run_row(r, row));
            return;
        }
    }
    let _ = flops;
    for (r, row) in out.data.chunks_mut(cols).enumerate() {
        run_row(r, row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::par::{set_execution_mode, ExecutionMode};

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn matmul_variants_agree_with_naive() {
        let mut rng = crate::util::seeded_rng(1, "matmul-test");
        let a = Matrix::randn(7, 5, 1.0, &mut rng);
        let b = Matrix::randn(5, 9, 1.0, &mut rng);
        let nn = a.matmul_nn(&b);
        let want = naive_matmul(&a, &b);
        for (x, y) in nn.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let nt = a.matmul_nt(&b.transpose());
        let tn = a.transpose().matmul_tn(&b);
        for (x, y) in nt.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in tn.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_matmul_is_bit_identical() {
        let mut rng = crate::util::seeded_rng(2, "matmul-par");
        // Big enough to cross the parallel threshold.
        let a = Matrix::randn(96, 96, 1.0, &mut rng);
        let b = Matrix::randn(96, 96, 1.0, &mut rng);
        set_execution_mode(ExecutionMode::Sequential);
        let seq = a.matmul_nn(&b);
        set_execution_mode(ExecutionMode::Parallel);
        let par = a.matmul_nn(&b);
        assert_eq!(seq.data(), par.data());
    }
}
