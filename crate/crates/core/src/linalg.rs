//! Small dense row-major matrices and vector helpers.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Glorot-uniform initialisation: `U(-a, a)` with `a = sqrt(6 / (rows + cols))`.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        Self::from_fn(rows, cols, |_, _| S::lit(rng.gen_range(-a..a)))
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
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out += x^T M` restricted to rows `offset..offset + x.len()`.
    pub fn acc_vecmat_rows(&self, x: &[S], offset: usize, out: &mut [S]) {
        debug_assert!(offset + x.len() <= self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (k, &xk) in x.iter().enumerate() {
            if xk == S::zero() {
                continue;
            }
            let row = self.row(offset + k);
            for (o, &w) in out.iter_mut().zip(row) {
                *o += xk * w;
            }
        }
    }

    /// `x^T M`, a vector of length `cols`.
    pub fn vecmat(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![S::zero(); self.cols];
        self.acc_vecmat_rows(x, 0, &mut out);
        out
    }

    /// `out += M[offset.., :] y`, i.e. the gradient of `x^T M` with respect to `x`.
    pub fn acc_matvec_rows(&self, y: &[S], offset: usize, out: &mut [S]) {
        debug_assert_eq!(y.len(), self.cols);
        for (k, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(offset + k), y);
        }
    }

    /// `M[offset + i, j] += x[i] * y[j]`.
    pub fn add_outer_rows(&mut self, x: &[S], y: &[S], offset: usize) {
        debug_assert_eq!(y.len(), self.cols);
        for (k, &xk) in x.iter().enumerate() {
            if xk == S::zero() {
                continue;
            }
            let row = self.row_mut(offset + k);
            for (r, &yj) in row.iter_mut().zip(y) {
                *r += xk * yj;
            }
        }
    }

    pub fn add_outer(&mut self, x: &[S], y: &[S]) {
        self.add_outer_rows(x, y, 0);
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = S::zero());
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<T: Scalar>(&self) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| T::lit(v.as_f64())).collect(),
        }
    }
}

impl<S> std::ops::Index<(usize, usize)> for Matrix<S> {
    type Output = S;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    if logits.is_empty() {
        return Vec::new();
    }
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let mut out: Vec<S> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: S = out.iter().copied().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// `log(sum(exp(z)))`, stable.
pub fn log_sum_exp<S: Scalar>(logits: &[S]) -> S {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    if max == S::neg_infinity() {
        return max;
    }
    let total: S = logits.iter().map(|&z| (z - max).exp()).sum();
    max + total.ln()
}

/// Backward of softmax: given `p = softmax(z)` and `dL/dp`, return `dL/dz`.
pub fn softmax_backward<S: Scalar>(probs: &[S], grad: &[S]) -> Vec<S> {
    let inner = dot(probs, grad);
    probs.iter().zip(grad).map(|(&p, &g)| p * (g - inner)).collect()
}

/// Cosine similarity; zero vectors compare as 0.
pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> S {
    let na = norm(a);
    let nb = norm(b);
    if na == S::zero() || nb == S::zero() {
        return S::zero();
    }
    dot(a, b) / (na * nb)
}

/// Gradients of `cosine(a, b)` with respect to `a` and `b`, scaled by `upstream`
/// and accumulated into `ga` / `gb`.
pub fn cosine_backward<S: Scalar>(a: &[S], b: &[S], upstream: S, ga: &mut [S], gb: &mut [S]) {
    let na = norm(a);
    let nb = norm(b);
    if na == S::zero() || nb == S::zero() {
        return;
    }
    let sim = dot(a, b) / (na * nb);
    let inv = S::one() / (na * nb);
    for i in 0..a.len() {
        ga[i] += upstream * (b[i] * inv - sim * a[i] / (na * na));
        gb[i] += upstream * (a[i] * inv - sim * b[i] / (nb * nb));
    }
}
