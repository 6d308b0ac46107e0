//! Dense linear algebra, seeded randomness and a finite-difference gradient oracle.
//!
//! All products accumulate every output entry left to right over the shared
//! dimension, so results are bit-reproducible regardless of how the loops are
//! blocked. The kernels are written as row updates (`out_row += a * b_row`),
//! which keeps that order while letting the compiler vectorize across columns.

use rand_core::{Rng as _, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{rows}x{cols}"),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("{cols} columns"),
                    format!("{} columns", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Copies the selected rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (dst, &src) in idx.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Standard product `a * b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::shape("matmul", a.shape_str(), b.shape_str()));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            axpy(out_row, aik, b.row(k));
        }
    }
    Ok(out)
}

/// `a^T * b`, accumulating over the shared row index in ascending order.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(Error::shape("matmul_tn", a.shape_str(), b.shape_str()));
    }
    let mut out = Matrix::zeros(a.cols, b.cols);
    for n in 0..a.rows {
        let b_row = b.row(n);
        for (k, &ank) in a.row(n).iter().enumerate() {
            axpy(&mut out.data[k * b.cols..(k + 1) * b.cols], ank, b_row);
        }
    }
    Ok(out)
}

#[inline]
fn axpy(out: &mut [f64], alpha: f64, x: &[f64]) {
    for (o, &xv) in out.iter_mut().zip(x) {
        *o += alpha * xv;
    }
}

/// Left-to-right dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Deterministic generator: xoshiro256** seeded through SplitMix64.
///
/// Uniform doubles take the top 53 bits of one draw. Each normal sample consumes
/// exactly two draws via Box-Muller (cosine branch only), so the stream position
/// after `n` normals is always `2n`.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: Xoshiro256StarStar,
    seed: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        // 1 - u lies in (0, 1], keeping ln finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in `0..n` (n > 0).
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// `n` i.i.d. standard-normal samples.
pub fn rng_normal(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

/// `n` mask entries, each 0 with probability `p` and 1 otherwise.
pub fn rng_bernoulli_mask(rng: &mut Rng, n: usize, p: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("mask probability {p} outside [0, 1]")));
    }
    Ok((0..n).map(|_| if rng.uniform() < p { 0.0 } else { 1.0 }).collect())
}

/// Central-difference gradient of `f` at `theta`.
pub fn finite_difference_gradient<F>(f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step {h} must be positive")));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let fp = f(&probe);
        probe[i] = theta[i] - h;
        let fm = f(&probe);
        probe[i] = theta[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!("objective evaluation at coordinate {i}")));
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;
    use proptest::prelude::*;

    fn random_matrix(rng: &mut Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap()
    }

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
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
    fn identity_product() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&Matrix::identity(2), &m).unwrap(), m);
    }

    #[test]
    fn column_selection() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let e = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(matmul(&m, &e).unwrap().as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = Rng::new(3);
        let a = random_matrix(&mut rng, 5, 7);
        let b = random_matrix(&mut rng, 7, 3);
        let fast = matmul(&a, &b).unwrap();
        let slow = naive(&a, &b);
        for (x, y) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        // Same summation order, so the match is in fact exact.
        assert_eq!(fast, slow);
    }

    #[test]
    fn transposed_variants_agree() {
        let mut rng = Rng::new(4);
        let a = random_matrix(&mut rng, 6, 4);
        let b = random_matrix(&mut rng, 6, 5);
        assert_eq!(matmul_tn(&a, &b).unwrap(), naive(&a.transpose(), &b));
    }

    #[test]
    fn dimension_mismatch_names_shapes() {
        let err = matmul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "{msg}");
    }

    #[test]
    fn xoshiro_reference_stream() {
        // Independent reference: SplitMix64 seeding + xoshiro256** written from the
        // published algorithm description.
        let mut rng = Rng::new(0);
        assert_eq!(rng.next_u64(), 11091344671253066420);
        assert_eq!(rng.next_u64(), 13793997310169335082);
        assert_eq!(rng.next_u64(), 1900383378846508768);
        let mut rng = Rng::new(42);
        assert_eq!(rng.next_u64(), 1546998764402558742);
        assert_eq!(rng.next_u64(), 6990951692964543102);
    }

    #[test]
    fn normal_moments() {
        assert!(rng_normal(&mut Rng::new(42), 0).is_empty());
        let v = rng_normal(&mut Rng::new(42), 100_000);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn streams_reproducible() {
        let a = rng_normal(&mut Rng::new(9), 10_000);
        let b = rng_normal(&mut Rng::new(9), 10_000);
        assert_eq!(a, b);
    }

    #[test]
    fn bernoulli_mask_edges() {
        let mut rng = Rng::new(1);
        assert!(rng_bernoulli_mask(&mut rng, 100, 0.0)
            .unwrap()
            .iter()
            .all(|&m| m == 1.0));
        assert!(rng_bernoulli_mask(&mut rng, 100, 1.0)
            .unwrap()
            .iter()
            .all(|&m| m == 0.0));
        assert!(rng_bernoulli_mask(&mut rng, 1, 1.5).is_err());
        assert!(rng_bernoulli_mask(&mut rng, 1, -0.1).is_err());
    }

    #[test]
    fn bernoulli_mask_rate() {
        // Binomial(1e6, 1e-3): mean 1000, sd ~31.6; [800, 1200] is beyond 6 sd.
        let m = rng_bernoulli_mask(&mut Rng::new(7), 1_000_000, 0.001).unwrap();
        let zeros = m.iter().filter(|&&v| v == 0.0).count();
        assert!((800..=1200).contains(&zeros), "zeros {zeros}");
    }

    #[test]
    fn fd_quadratic_and_sine() {
        let g = finite_difference_gradient(|t| 0.5 * dot(t, t), &[1.0, 2.0], 1e-4).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8);
        let g = finite_difference_gradient(|t| t[0].sin(), &[0.0], 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fd_rejects_bad_input() {
        assert!(finite_difference_gradient(|t| t[0], &[0.0], 0.0).is_err());
        assert!(finite_difference_gradient(|t| 1.0 / t[0], &[0.0], 1e-3).is_ok());
        assert!(finite_difference_gradient(|t| t[0].ln(), &[0.0], 1e-3).is_err());
    }

    #[test]
    fn fd_converges_quadratically() {
        // Cubic with analytic derivative 3x^2 + 2x at x = 0.7; the central
        // difference error is exactly h^2 (third derivative 6 / 6), so halving h
        // divides the error by 4.
        let f = |t: &[f64]| t[0].powi(3) + t[0] * t[0];
        let exact = 3.0 * 0.49 + 1.4;
        let e1 = (finite_difference_gradient(f, &[0.7], 1e-2).unwrap()[0] - exact).abs();
        let e2 = (finite_difference_gradient(f, &[0.7], 5e-3).unwrap()[0] - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn matmul_associative(seed in any::<u64>(), n in 1usize..6, k in 1usize..6, m in 1usize..6, p in 1usize..6) {
            let mut rng = Rng::new(seed);
            let a = random_matrix(&mut rng, n, k);
            let b = random_matrix(&mut rng, k, m);
            let c = random_matrix(&mut rng, m, p);
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            let scale = left.max_abs().max(1.0);
            for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
                prop_assert!((x - y).abs() < 1e-9 * scale);
            }
        }
    }
}
