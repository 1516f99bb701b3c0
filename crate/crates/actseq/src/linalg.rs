//! Small dense row-major matrices and the handful of kernels the scorer
//! needs. Shared by the autodiff tape and the incremental inference path so
//! both compute with the same arithmetic.

use crate::num::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Real> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![F::ZERO; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(
            rows * cols,
            data.len(),
            "matrix shape does not match data length"
        );
        Mat { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map_to<G: Real>(&self) -> Mat<G> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| G::from_f64(v.to_f64())).collect(),
        }
    }
}

/// `out += a (m×k) · b (k×n)`.
pub fn matmul_acc<F: Real>(a: &[F], m: usize, k: usize, b: &[F], n: usize, out: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == F::ZERO {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
}

/// `out += a (m×k) · bᵀ` where `b` is `n×k`.
pub fn matmul_nt_acc<F: Real>(a: &[F], m: usize, k: usize, b: &[F], n: usize, out: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = F::ZERO;
            for p in 0..k {
                acc += arow[p] * brow[p];
            }
            orow[j] += acc;
        }
    }
}

/// `out += aᵀ · b` where `a` is `k×m` and `b` is `k×n`.
pub fn matmul_tn_acc<F: Real>(a: &[F], k: usize, m: usize, b: &[F], n: usize, out: &mut [F]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = arow[i];
            if av == F::ZERO {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
}

pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = F::ZERO;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Max-shifted softmax over a row, in place.
pub fn softmax_row<F: Real>(row: &mut [F]) {
    let mut max = row[0];
    for &v in row.iter() {
        max = max.maximum(v);
    }
    let mut sum = F::ZERO;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Max-shifted log-sum-exp of a slice.
pub fn log_sum_exp<F: Real>(vals: &[F]) -> F {
    let mut max = vals[0];
    for &v in vals.iter() {
        max = max.maximum(v);
    }
    let mut sum = F::ZERO;
    for &v in vals.iter() {
        sum += (v - max).exp();
    }
    max + sum.ln()
}

/// RMS normalization of a row into `out`: `out_i = x_i / sqrt(mean(x²) + eps)`.
pub fn rmsnorm_row<F: Real>(x: &[F], eps: F, out: &mut [F]) {
    let n = F::from_f64(x.len() as f64);
    let mut ms = F::ZERO;
    for &v in x.iter() {
        ms += v * v;
    }
    let r = (ms / n + eps).sqrt();
    for (o, &v) in out.iter_mut().zip(x.iter()) {
        *o = v / r;
    }
}

/// Sinusoidal positional encodings, one row per position.
pub fn positional_encoding<F: Real>(positions: usize, dim: usize) -> Mat<F> {
    let mut m = Mat::zeros(positions, dim);
    for p in 0..positions {
        let row = m.row_mut(p);
        for i in 0..dim {
            let pair = (i / 2) as f64;
            let rate = 10000f64.powf(2.0 * pair / dim as f64);
            let angle = p as f64 / rate;
            row[i] = F::from_f64(if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    m
}

/// Additive causal mask: 0 on and below the diagonal, a large negative
/// constant above it. Finite so that arithmetic stays NaN-free.
pub fn causal_mask<F: Real>(n: usize) -> Mat<F> {
    let neg = F::from_f64(-1e9);
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        let row = m.row_mut(i);
        for j in (i + 1)..n {
            row[j] = neg;
        }
    }
    m
}
