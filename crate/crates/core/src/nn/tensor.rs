use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a `[rows.len() × width]` matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            let r = r.as_ref();
            if r.len() != width {
                return Err(Error::ShapeMismatch(format!(
                    "ragged rows: expected width {width}, got {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor {
            shape: vec![rows.len(), width],
            data,
        })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Number of rows of a matrix (first axis).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Row width of a matrix (product of trailing axes).
    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.cols();
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Rows in reverse order.
    pub fn reversed_rows(&self) -> Tensor {
        let mut out = Tensor::zeros(&self.shape);
        let n = self.rows();
        for i in 0..n {
            out.row_mut(i).copy_from_slice(self.row(n - 1 - i));
        }
        out
    }

    /// Concatenates two matrices with the same row count along columns.
    pub fn hconcat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.rows() != b.rows() {
            return Err(Error::ShapeMismatch(format!(
                "hconcat of {:?} and {:?}",
                a.shape, b.shape
            )));
        }
        let (wa, wb) = (a.cols(), b.cols());
        let mut out = Tensor::zeros(&[a.rows(), wa + wb]);
        for i in 0..a.rows() {
            let r = out.row_mut(i);
            r[..wa].copy_from_slice(a.row(i));
            r[wa..].copy_from_slice(b.row(i));
        }
        Ok(out)
    }

    /// Splits columns at `at`.
    pub fn hsplit(&self, at: usize) -> (Tensor, Tensor) {
        let w = self.cols();
        let mut a = Tensor::zeros(&[self.rows(), at]);
        let mut b = Tensor::zeros(&[self.rows(), w - at]);
        for i in 0..self.rows() {
            a.row_mut(i).copy_from_slice(&self.row(i)[..at]);
            b.row_mut(i).copy_from_slice(&self.row(i)[at..]);
        }
        (a, b)
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// `out = W x + b` for row-major `W` of shape `[out.len() × x.len()]`.
pub(crate) fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = b[i] + dot(&w[i * n..(i + 1) * n], x);
    }
}

/// `dx += Wᵀ dy` and `dW += dy xᵀ`.
pub(crate) fn affine_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    dx: &mut [f64],
) {
    let n = x.len();
    for (i, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &w[i * n..(i + 1) * n];
        let drow = &mut dw[i * n..(i + 1) * n];
        for j in 0..n {
            dx[j] += row[j] * g;
            drow[j] += x[j] * g;
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}
