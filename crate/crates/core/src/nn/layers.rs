//! Feed-forward layers: affine projection, character convolution with
//! max-over-time, and a highway gate.

use rand::Rng;

use super::ops::{relu, sigmoid};
use super::params::{uniform, xavier_uniform};
use super::tensor::{affine, affine_backward};
use super::{GradBuffer, ParamId, ParamStore, Tensor};
use crate::{Error, Result};

/// `y = W x + b` with `W: [d_out × d_in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    /// Xavier-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_out: usize,
        trainable: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let w = store.add(
            format!("{prefix}.weight"),
            xavier_uniform(rng, d_out, d_in),
            trainable,
        )?;
        let b = store.add(format!("{prefix}.bias"), Tensor::zeros(&[d_out]), trainable)?;
        Ok(Linear { w, b, d_in, d_out })
    }

    /// All-zero weights and bias (uniform softmax at initialization).
    pub fn zeros(store: &mut ParamStore, prefix: &str, d_in: usize, d_out: usize, trainable: bool) -> Result<Self> {
        let w = store.add(format!("{prefix}.weight"), Tensor::zeros(&[d_out, d_in]), trainable)?;
        let b = store.add(format!("{prefix}.bias"), Tensor::zeros(&[d_out]), trainable)?;
        Ok(Linear { w, b, d_in, d_out })
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in {
            return Err(Error::ShapeMismatch(format!(
                "linear expects input width {}, got {}",
                self.d_in,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.d_out];
        affine(store.value(self.w).data(), store.value(self.b).data(), x, &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, store: &ParamStore, x: &[f64], dy: &[f64], grads: &mut GradBuffer) -> Vec<f64> {
        let mut dx = vec![0.0; self.d_in];
        affine_backward(store.value(self.w).data(), x, dy, grads.slot(self.w), &mut dx);
        for (g, d) in grads.slot(self.b).iter_mut().zip(dy) {
            *g += d;
        }
        dx
    }
}

/// A bank of `n_filters` character filters of one width, followed by tanh
/// and max-over-time. Inputs shorter than the width are right-padded with
/// zero rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharConv {
    pub w: ParamId,
    pub b: ParamId,
    pub width: usize,
    pub n_filters: usize,
    pub d_in: usize,
}

#[derive(Debug, Clone)]
pub struct CharConvCache {
    /// Winning window start per filter.
    argmax: Vec<usize>,
    /// Output after tanh.
    out: Vec<f64>,
}

impl CharConv {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        width: usize,
        n_filters: usize,
        trainable: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let w = store.add(
            format!("{prefix}.weight"),
            xavier_uniform(rng, n_filters, width * d_in),
            trainable,
        )?;
        let b = store.add(format!("{prefix}.bias"), Tensor::zeros(&[n_filters]), trainable)?;
        Ok(CharConv {
            w,
            b,
            width,
            n_filters,
            d_in,
        })
    }

    fn window(&self, x: &Tensor, start: usize, buf: &mut [f64]) {
        let l = x.rows();
        for k in 0..self.width {
            let dst = &mut buf[k * self.d_in..(k + 1) * self.d_in];
            if start + k < l {
                dst.copy_from_slice(x.row(start + k));
            } else {
                dst.fill(0.0);
            }
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<(Vec<f64>, CharConvCache)> {
        if x.rows() == 0 || x.cols() != self.d_in {
            return Err(Error::ShapeMismatch(format!(
                "char conv expects [L ≥ 1 × {}], got {:?}",
                self.d_in,
                x.shape()
            )));
        }
        let w = store.value(self.w).data();
        let b = store.value(self.b).data();
        let positions = x.rows().max(self.width) - self.width + 1;
        let mut buf = vec![0.0; self.width * self.d_in];
        let mut z = vec![0.0; self.n_filters];
        let mut best = vec![f64::NEG_INFINITY; self.n_filters];
        let mut argmax = vec![0usize; self.n_filters];
        for p in 0..positions {
            self.window(x, p, &mut buf);
            affine(w, b, &buf, &mut z);
            for f in 0..self.n_filters {
                if z[f] > best[f] {
                    best[f] = z[f];
                    argmax[f] = p;
                }
            }
        }
        let out: Vec<f64> = best.iter().map(|v| v.tanh()).collect();
        Ok((out.clone(), CharConvCache { argmax, out }))
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        x: &Tensor,
        cache: &CharConvCache,
        dy: &[f64],
        grads: &mut GradBuffer,
    ) -> Tensor {
        let w = store.value(self.w).data();
        let span = self.width * self.d_in;
        let mut dx = Tensor::zeros(x.shape());
        let mut buf = vec![0.0; span];
        let mut dw = vec![0.0; self.n_filters * span];
        let mut db = vec![0.0; self.n_filters];
        for f in 0..self.n_filters {
            let dz = dy[f] * (1.0 - cache.out[f] * cache.out[f]);
            if dz == 0.0 {
                continue;
            }
            let p = cache.argmax[f];
            self.window(x, p, &mut buf);
            db[f] += dz;
            let row = &w[f * span..(f + 1) * span];
            let drow = &mut dw[f * span..(f + 1) * span];
            for k in 0..span {
                drow[k] += dz * buf[k];
            }
            for k in 0..self.width {
                if p + k < x.rows() {
                    let dst = dx.row_mut(p + k);
                    for c in 0..self.d_in {
                        dst[c] += dz * row[k * self.d_in + c];
                    }
                }
            }
        }
        for (g, d) in grads.slot(self.w).iter_mut().zip(&dw) {
            *g += d;
        }
        for (g, d) in grads.slot(self.b).iter_mut().zip(&db) {
            *g += d;
        }
        dx
    }
}

/// One highway layer: `y = t ⊙ relu(W_h x + b_h) + (1 − t) ⊙ x` with
/// transform gate `t = σ(W_t x + b_t)`. The gate bias starts at −1 so the
/// layer begins close to the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Highway {
    pub transform: Linear,
    pub gate: Linear,
}

#[derive(Debug, Clone)]
pub struct HighwayCache {
    h_pre: Vec<f64>,
    t: Vec<f64>,
}

impl Highway {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d: usize,
        trainable: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let transform = Linear::new(store, &format!("{prefix}.transform"), d, d, trainable, rng)?;
        let gate = Linear::new(store, &format!("{prefix}.gate"), d, d, trainable, rng)?;
        store.value_mut(gate.b).fill(-1.0);
        Ok(Highway { transform, gate })
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Result<(Vec<f64>, HighwayCache)> {
        let h_pre = self.transform.forward(store, x)?;
        let t: Vec<f64> = self.gate.forward(store, x)?.into_iter().map(sigmoid).collect();
        let y = x
            .iter()
            .zip(&h_pre)
            .zip(&t)
            .map(|((&xi, &hi), &ti)| ti * relu(hi) + (1.0 - ti) * xi)
            .collect();
        Ok((y, HighwayCache { h_pre, t }))
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        x: &[f64],
        cache: &HighwayCache,
        dy: &[f64],
        grads: &mut GradBuffer,
    ) -> Vec<f64> {
        let d = x.len();
        let mut dh = vec![0.0; d];
        let mut dt = vec![0.0; d];
        let mut dx = vec![0.0; d];
        for i in 0..d {
            let t = cache.t[i];
            let h = relu(cache.h_pre[i]);
            dh[i] = if cache.h_pre[i] > 0.0 { dy[i] * t } else { 0.0 };
            dt[i] = dy[i] * (h - x[i]) * t * (1.0 - t);
            dx[i] = dy[i] * (1.0 - t);
        }
        let a = self.transform.backward(store, x, &dh, grads);
        let b = self.gate.backward(store, x, &dt, grads);
        for i in 0..d {
            dx[i] += a[i] + b[i];
        }
        dx
    }
}

/// Embedding table lookup producing a `[ids.len() × d]` matrix.
pub fn embed(store: &ParamStore, table: ParamId, ids: &[usize]) -> Tensor {
    let t = store.value(table);
    let d = t.cols();
    let mut out = Tensor::zeros(&[ids.len(), d]);
    for (r, &id) in ids.iter().enumerate() {
        out.row_mut(r).copy_from_slice(t.row(id));
    }
    out
}

pub fn embed_backward(table: ParamId, ids: &[usize], d_out: &Tensor, grads: &mut GradBuffer) {
    let d = d_out.cols();
    let slot = grads.slot(table);
    for (r, &id) in ids.iter().enumerate() {
        for (g, v) in slot[id * d..(id + 1) * d].iter_mut().zip(d_out.row(r)) {
            *g += v;
        }
    }
}

pub fn embedding_table<R: Rng + ?Sized>(rng: &mut R, rows: usize, d: usize) -> Tensor {
    uniform(rng, &[rows, d], (3.0 / d as f64).sqrt())
}
