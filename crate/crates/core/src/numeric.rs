//! Dense linear algebra, activations and the seeded random source.
//!
//! Everything is `f64` and row-major. Vectors are plain `[f64]` slices; the
//! helpers here cover the handful of kernels the recurrent cells need.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(
            data.len() == rows * cols,
            Argument,
            "matrix data length {} does not match {rows}x{cols}",
            data.len()
        );
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        ensure!(
            rows.iter().all(|r| r.len() == cols),
            Argument,
            "ragged rows"
        );
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
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

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// Matrix-vector product `A v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure!(
            v.len() == self.cols,
            Argument,
            "matvec: matrix is {}x{} but vector has length {}",
            self.rows,
            self.cols,
            v.len()
        );
        let mut out = vec![0.0; self.rows];
        self.matvec_acc(v, &mut out);
        Ok(out)
    }

    /// `out += A v`. Panics on shape mismatch.
    #[inline]
    pub fn matvec_acc(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.cols, "matvec_acc: input length");
        assert_eq!(out.len(), self.rows, "matvec_acc: output length");
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o += dot(row, v);
        }
    }

    /// `out += Aᵀ v`. Panics on shape mismatch.
    #[inline]
    pub fn tmatvec_acc(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.rows, "tmatvec_acc: input length");
        assert_eq!(out.len(), self.cols, "tmatvec_acc: output length");
        if self.cols == 0 {
            return;
        }
        for (&vi, row) in v.iter().zip(self.data.chunks_exact(self.cols)) {
            if vi != 0.0 {
                axpy(vi, row, out);
            }
        }
    }

    /// `A += a bᵀ`.
    #[inline]
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), self.rows, "add_outer: left length");
        assert_eq!(b.len(), self.cols, "add_outer: right length");
        if self.cols == 0 {
            return;
        }
        for (&ai, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if ai != 0.0 {
                axpy(ai, b, row);
            }
        }
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        ensure!(
            self.shape() == other.shape(),
            Argument,
            "hadamard: shapes {:?} and {:?} differ",
            self.shape(),
            other.shape()
        );
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// Equality on bit patterns, so `NaN` sentinels compare equal.
    pub fn bit_eq(&self, other: &Matrix) -> bool {
        self.shape() == other.shape()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| sigmoid_scalar(x)).collect()
}

pub fn tanh(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.tanh()).collect()
}

/// Softmax with max subtraction.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Seeded random source.
///
/// The generator is ChaCha8 keyed by the 64-bit seed (via
/// `SeedableRng::seed_from_u64`) with the stream id selecting an independent
/// ChaCha stream. Uniforms take the top 53 bits of a `u64`; Gaussians use the
/// Box-Muller transform and cache the second variate of each pair. None of
/// these choices may change without breaking bit-reproducibility.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
    spare_gaussian: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            spare_gaussian: None,
        }
    }

    /// Derive a stream id from a list of integer coordinates
    /// (e.g. `[purpose, epoch, sample]`) with a SplitMix64 fold.
    pub fn stream_id(parts: &[u64]) -> u64 {
        let mut h = 0x9E37_79B9_7F4A_7C15u64;
        for &p in parts {
            h = splitmix64(h ^ p);
        }
        h
    }

    pub fn for_stream(seed: u64, parts: &[u64]) -> Self {
        Self::new(seed, Self::stream_id(parts))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_gaussian = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> Result<bool> {
        ensure!(
            (0.0..=1.0).contains(&p),
            Argument,
            "bernoulli probability {p} outside [0, 1]"
        );
        Ok(self.uniform() < p)
    }

    /// Uniform index in `0..n` (modulo reduction; bias is below 2^-40 for
    /// the sizes used here).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        (self.next_u64() % n as u64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, proptest};

    #[test]
    fn matvec_examples() {
        assert_eq!(
            Matrix::identity(3).matvec(&[1.0, 2.0, 3.0]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            Matrix::zeros(2, 2).matvec(&[5.0, 7.0]).unwrap(),
            vec![0.0, 0.0]
        );
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn matvec_rejects_mismatch() {
        assert!(Matrix::zeros(2, 3).matvec(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn transpose_and_outer_kernels() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let mut out = vec![0.0; 2];
        a.tmatvec_acc(&[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, vec![-4.0, -4.0]);
        let mut m = Matrix::zeros(2, 3);
        m.add_outer(&[1.0, 2.0], &[1.0, 0.0, -1.0]);
        assert_eq!(m.data(), &[1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
    }

    #[test]
    fn activation_examples() {
        assert_eq!(sigmoid(&[0.0]), vec![0.5]);
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert!((tanh(&[1.0])[0] - 0.761_594_155_955_764_9).abs() < 1e-15);
    }

    #[test]
    fn rng_is_reproducible() {
        let mut a = Rng::new(42, 3);
        let mut b = Rng::new(42, 3);
        for _ in 0..100 {
            assert_eq!(a.gaussian().to_bits(), b.gaussian().to_bits());
        }
        let mut c = Rng::new(42, 4);
        assert_ne!(Rng::new(42, 3).next_u64(), c.next_u64());
    }

    #[test]
    fn bernoulli_edges() {
        let mut rng = Rng::new(1, 0);
        assert!((0..1000).all(|_| !rng.bernoulli(0.0).unwrap()));
        assert!((0..1000).all(|_| rng.bernoulli(1.0).unwrap()));
        assert!(rng.bernoulli(1.5).is_err());
        assert!(rng.bernoulli(-0.1).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::new(2024, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut rng = Rng::new(9, 0);
        let mut v: Vec<usize> = (0..50).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(v in prop::collection::vec(-1e3f64..1e3, 1..20)) {
            let p = softmax(&v);
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn sigmoid_is_symmetric(x in -50.0f64..50.0) {
            let s = sigmoid_scalar(x) + sigmoid_scalar(-x);
            prop_assert!((s - 1.0).abs() <= 1e-15);
        }
    }
}
