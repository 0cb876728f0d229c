//! Dense row-major matrices and compensated reduction kernels.
//!
//! Everything here works in `f64`. Reductions that feed oracle comparisons
//! (template means, similarity scores) use Kahan/Neumaier compensation so
//! results stay stable at large dimensions and under input permutation.

use serde::{Deserialize, Serialize};

/// Number of independent accumulator lanes in the dot/distance kernels.
/// Lanes are independent so the compiler can keep them in vector registers.
const LANES: usize = 8;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value()
}

#[inline]
fn reduce_lanes(sum: [f64; LANES], comp: [f64; LANES], tail: CompensatedSum) -> f64 {
    let mut acc = tail;
    for l in 0..LANES {
        acc.add(sum[l]);
        acc.add(-comp[l]);
    }
    acc.value()
}

/// Lane-wise Kahan accumulation of `f(a[i], b[i])`.
#[inline(always)]
fn lanewise<F: Fn(f64, f64) -> f64>(a: &[f64], b: &[f64], f: F) -> f64 {
    assert_eq!(a.len(), b.len(), "kernel operands must have equal length");
    let mut sum = [0.0f64; LANES];
    let mut comp = [0.0f64; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for l in 0..LANES {
            let y = f(xa[l], xb[l]) - comp[l];
            let t = sum[l] + y;
            comp[l] = (t - sum[l]) - y;
            sum[l] = t;
        }
    }
    let mut tail = CompensatedSum::new();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail.add(f(x, y));
    }
    reduce_lanes(sum, comp, tail)
}

/// Compensated inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    lanewise(a, b, |x, y| x * y)
}

/// Compensated squared Euclidean distance.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    lanewise(a, b, |x, y| {
        let d = x - y;
        d * d
    })
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Row-major dense matrix.
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

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    /// Stacks equal-length rows. Returns `None` if lengths differ.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Option<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return None;
            }
            data.extend_from_slice(r);
        }
        Some(Self {
            rows: rows.len(),
            cols,
            data,
        })
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so guard the degenerate width
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    /// Gathers the given rows into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Keeps only the given columns, in order.
    pub fn select_cols(&self, cols: std::ops::Range<usize>) -> Self {
        let width = cols.len();
        let mut data = Vec::with_capacity(self.rows * width);
        for r in self.iter_rows() {
            data.extend_from_slice(&r[cols.clone()]);
        }
        Self {
            rows: self.rows,
            cols: width,
            data,
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }
}

/// `input · weightᵀ + bias`, the affine map used by every head layer.
///
/// `input` is batch×in, `weight` is out×in, `bias` has length out.
pub fn affine(input: &Matrix, weight: &Matrix, bias: &[f64]) -> Matrix {
    assert_eq!(input.cols(), weight.cols(), "affine: input width mismatch");
    assert_eq!(weight.rows(), bias.len(), "affine: bias length mismatch");
    let mut out = Matrix::zeros(input.rows(), weight.rows());
    for (i, x) in input.iter_rows().enumerate() {
        let o = out.row_mut(i);
        for (j, w) in weight.iter_rows().enumerate() {
            let mut acc = bias[j];
            for (a, b) in x.iter().zip(w) {
                acc += a * b;
            }
            o[j] = acc;
        }
    }
    out
}

/// `aᵀ · b` for a: n×p, b: n×q, giving p×q. Used for weight gradients.
pub fn transpose_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.rows(), b.rows(), "transpose_matmul: row mismatch");
    let mut out = Matrix::zeros(a.cols(), b.cols());
    for r in 0..a.rows() {
        let ar = a.row(r);
        let br = b.row(r);
        for (p, &x) in ar.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let o = out.row_mut(p);
            for (q, &y) in br.iter().enumerate() {
                o[q] += x * y;
            }
        }
    }
    out
}

/// `a · b` for a: n×p, b: p×q.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows(), "matmul: inner dimension mismatch");
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        let ar = a.row(i);
        let o = out.row_mut(i);
        for (k, &x) in ar.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (q, &y) in b.row(k).iter().enumerate() {
                o[q] += x * y;
            }
        }
    }
    out
}
