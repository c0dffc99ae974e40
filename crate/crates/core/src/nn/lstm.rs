//! Unidirectional and bidirectional LSTM layers with backpropagation through
//! time.
//!
//! Gate layout inside the stacked weight matrix `W: [4h × (d_in + h)]` and
//! bias `b: [4h]` is input, forget, candidate, output. A step computes
//!
//! ```text
//! a = W [x_t; h_{t-1}] + b
//! i = σ(a_i)  f = σ(a_f)  g = tanh(a_g)  o = σ(a_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use rand::Rng;

use super::ops::sigmoid;
use super::params::uniform;
use super::tensor::{affine, affine_backward};
use super::{GradBuffer, ParamId, ParamStore, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lstm {
    pub w: ParamId,
    pub b: ParamId,
    pub d_in: usize,
    pub d_h: usize,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    /// `[x_t; h_{t-1}]` per step.
    xh: Tensor,
    /// Activated gates `[i f g o]` per step.
    gates: Tensor,
    /// Cell states `c_{-1} .. c_{T-1}` (T + 1 rows).
    cells: Tensor,
    tanh_c: Tensor,
}

#[derive(Debug, Clone)]
pub struct LstmOutput {
    /// `[T × d_h]`
    pub hidden: Tensor,
    pub h_final: Vec<f64>,
    pub c_final: Vec<f64>,
    pub cache: LstmCache,
}

impl Lstm {
    /// Weights uniform in `±1/√d_h`, zero bias except the forget gate at +1.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_h: usize,
        trainable: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let bound = 1.0 / (d_h as f64).sqrt();
        let w = store.add(
            format!("{prefix}.weight"),
            uniform(rng, &[4 * d_h, d_in + d_h], bound),
            trainable,
        )?;
        let mut bias = Tensor::zeros(&[4 * d_h]);
        bias.data_mut()[d_h..2 * d_h].fill(1.0);
        let b = store.add(format!("{prefix}.bias"), bias, trainable)?;
        Ok(Lstm { w, b, d_in, d_h })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor, h0: &[f64], c0: &[f64]) -> Result<LstmOutput> {
        let h = self.d_h;
        if x.rows() == 0 || x.cols() != self.d_in || h0.len() != h || c0.len() != h {
            return Err(Error::ShapeMismatch(format!(
                "lstm(d_in={}, d_h={}) got input {:?}, h0 {}, c0 {}",
                self.d_in,
                h,
                x.shape(),
                h0.len(),
                c0.len()
            )));
        }
        let w = store.value(self.w);
        let b = store.value(self.b);
        if w.shape() != [4 * h, self.d_in + h] {
            return Err(Error::ShapeMismatch(format!(
                "lstm weight {:?} inconsistent with d_in={}, d_h={h}",
                w.shape(),
                self.d_in
            )));
        }
        let (w, b) = (w.data(), b.data());
        let steps = x.rows();
        let mut xh = Tensor::zeros(&[steps, self.d_in + h]);
        let mut gates = Tensor::zeros(&[steps, 4 * h]);
        let mut cells = Tensor::zeros(&[steps + 1, h]);
        let mut tanh_c = Tensor::zeros(&[steps, h]);
        let mut hidden = Tensor::zeros(&[steps, h]);
        cells.row_mut(0).copy_from_slice(c0);
        let mut h_prev = h0.to_vec();
        let mut c_prev = c0.to_vec();
        let mut a = vec![0.0; 4 * h];
        let mut g = vec![0.0; 4 * h];
        for t in 0..steps {
            {
                let row = xh.row_mut(t);
                row[..self.d_in].copy_from_slice(x.row(t));
                row[self.d_in..].copy_from_slice(&h_prev);
            }
            affine(w, b, xh.row(t), &mut a);
            for k in 0..h {
                g[k] = sigmoid(a[k]);
                g[h + k] = sigmoid(a[h + k]);
                g[2 * h + k] = a[2 * h + k].tanh();
                g[3 * h + k] = sigmoid(a[3 * h + k]);
            }
            let tc = tanh_c.row_mut(t);
            for k in 0..h {
                c_prev[k] = g[h + k] * c_prev[k] + g[k] * g[2 * h + k];
                tc[k] = c_prev[k].tanh();
                h_prev[k] = g[3 * h + k] * tc[k];
            }
            gates.row_mut(t).copy_from_slice(&g);
            cells.row_mut(t + 1).copy_from_slice(&c_prev);
            hidden.row_mut(t).copy_from_slice(&h_prev);
        }
        let c_final = cells.row(steps).to_vec();
        Ok(LstmOutput {
            hidden,
            h_final: h_prev,
            c_final,
            cache: LstmCache {
                xh,
                gates,
                cells,
                tanh_c,
            },
        })
    }

    /// Backpropagates `d_hidden` (`[T × d_h]`) through time, accumulating
    /// parameter gradients. Returns `dL/dx` of shape `[T × d_in]`.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &LstmCache,
        d_hidden: &Tensor,
        grads: &mut GradBuffer,
    ) -> Tensor {
        let h = self.d_h;
        let d_in = self.d_in;
        let steps = d_hidden.rows();
        let w = store.value(self.w).data();
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; 4 * h];
        let mut dx = Tensor::zeros(&[steps, d_in]);
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut da = vec![0.0; 4 * h];
        let mut dxh = vec![0.0; d_in + h];
        for t in (0..steps).rev() {
            let g = cache.gates.row(t);
            let tc = cache.tanh_c.row(t);
            let c_prev = cache.cells.row(t);
            let dh_ext = d_hidden.row(t);
            for k in 0..h {
                let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let dh = dh_ext[k] + dh_next[k];
                let d_o = dh * tc[k];
                let dc = dh * o * (1.0 - tc[k] * tc[k]) + dc_next[k];
                let d_i = dc * gg;
                let d_g = dc * i;
                let d_f = dc * c_prev[k];
                dc_next[k] = dc * f;
                da[k] = d_i * i * (1.0 - i);
                da[h + k] = d_f * f * (1.0 - f);
                da[2 * h + k] = d_g * (1.0 - gg * gg);
                da[3 * h + k] = d_o * o * (1.0 - o);
            }
            dxh.fill(0.0);
            affine_backward(w, cache.xh.row(t), &da, &mut dw, &mut dxh);
            for (acc, v) in db.iter_mut().zip(&da) {
                *acc += v;
            }
            dx.row_mut(t).copy_from_slice(&dxh[..d_in]);
            dh_next.copy_from_slice(&dxh[d_in..]);
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

/// Forward LSTM over the sequence and a second LSTM over the reversed
/// sequence; each output row is `[forward_t ; backward_t]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
}

impl BiLstm {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_h: usize,
        trainable: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let forward = Lstm::new(store, &format!("{prefix}.fwd"), d_in, d_h, trainable, rng)?;
        let backward = Lstm::new(store, &format!("{prefix}.bwd"), d_in, d_h, trainable, rng)?;
        Ok(BiLstm { forward, backward })
    }

    pub fn d_out(&self) -> usize {
        2 * self.forward.d_h
    }

    /// `[T × d_in]` to `[T × 2·d_h]`, zero initial states.
    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<(Tensor, BiLstmCache)> {
        let h = self.forward.d_h;
        let zeros = vec![0.0; h];
        let f = self.forward.forward(store, x, &zeros, &zeros)?;
        let b = self
            .backward
            .forward(store, &x.reversed_rows(), &zeros, &zeros)?;
        let out = Tensor::hconcat(&f.hidden, &b.hidden.reversed_rows())?;
        Ok((
            out,
            BiLstmCache {
                fwd: f.cache,
                bwd: b.cache,
            },
        ))
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &BiLstmCache,
        d_out: &Tensor,
        grads: &mut GradBuffer,
    ) -> Tensor {
        let (df, db) = d_out.hsplit(self.forward.d_h);
        let mut dx = self.forward.backward(store, &cache.fwd, &df, grads);
        let dxb = self
            .backward
            .backward(store, &cache.bwd, &db.reversed_rows(), grads)
            .reversed_rows();
        dx.add_assign(&dxb);
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ops::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn random_input(r: &mut ChaCha8Rng, t: usize, d: usize) -> Tensor {
        uniform(r, &[t, d], 1.0)
    }

    #[test]
    fn zero_weights_give_zero_states() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let lstm = Lstm::new(&mut store, "l", 3, 4, true, &mut r).unwrap();
        store.value_mut(lstm.w).fill(0.0);
        store.value_mut(lstm.b).fill(0.0);
        let x = random_input(&mut r, 5, 3);
        let out = lstm.forward(&store, &x, &[0.0; 4], &[0.0; 4]).unwrap();
        assert!(out.hidden.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn single_step_matches_hand_recurrence() {
        // d_in = d_h = 2; W rows are gates i0 i1 f0 f1 g0 g1 o0 o1,
        // columns are x0 x1 h0 h1.
        let mut store = ParamStore::new();
        let mut r = rng();
        let lstm = Lstm::new(&mut store, "l", 2, 2, true, &mut r).unwrap();
        #[rustfmt::skip]
        let w = vec![
            0.1, 0.2, 0.3, 0.4,
            -0.1, 0.0, 0.2, 0.1,
            0.5, -0.5, 0.0, 0.0,
            0.3, 0.3, -0.2, 0.1,
            1.0, 0.0, 0.5, 0.0,
            0.0, 1.0, 0.0, 0.5,
            0.2, 0.2, 0.2, 0.2,
            -0.3, 0.1, 0.0, 0.4,
        ];
        *store.value_mut(lstm.w) = Tensor::from_vec(&[8, 4], w.clone()).unwrap();
        let b = vec![0.0, 0.1, 1.0, 1.0, 0.0, -0.1, 0.05, 0.0];
        *store.value_mut(lstm.b) = Tensor::vector(b.clone());
        let x = [0.5, -1.0];
        let h0 = [0.2, -0.3];
        let c0 = [0.1, 0.4];
        let out = lstm
            .forward(&store, &Tensor::from_rows(&[x]).unwrap(), &h0, &c0)
            .unwrap();

        let xh = [x[0], x[1], h0[0], h0[1]];
        let pre = |r: usize| b[r] + (0..4).map(|j| w[r * 4 + j] * xh[j]).sum::<f64>();
        for k in 0..2 {
            let i = sigmoid(pre(k));
            let f = sigmoid(pre(2 + k));
            let g = pre(4 + k).tanh();
            let o = sigmoid(pre(6 + k));
            let c = f * c0[k] + i * g;
            let h = o * c.tanh();
            assert!((out.c_final[k] - c).abs() < 1e-15);
            assert!((out.hidden.row(0)[k] - h).abs() < 1e-15);
        }
    }

    #[test]
    fn sequence_equals_threaded_single_steps() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let lstm = Lstm::new(&mut store, "l", 3, 4, true, &mut r).unwrap();
        let x = random_input(&mut r, 3, 3);
        let full = lstm.forward(&store, &x, &[0.0; 4], &[0.0; 4]).unwrap();
        let (mut h, mut c) = (vec![0.0; 4], vec![0.0; 4]);
        for t in 0..3 {
            let step = Tensor::from_rows(&[x.row(t)]).unwrap();
            let o = lstm.forward(&store, &step, &h, &c).unwrap();
            assert_eq!(o.hidden.row(0), full.hidden.row(t));
            h = o.h_final;
            c = o.c_final;
        }
        assert_eq!(h, full.h_final);
        assert_eq!(c, full.c_final);
    }

    #[test]
    fn bilstm_shape_and_zero_law() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let bi = BiLstm::new(&mut store, "bi", 5, 3, true, &mut r).unwrap();
        let x = random_input(&mut r, 4, 5);
        let (out, _) = bi.forward(&store, &x).unwrap();
        assert_eq!(out.shape(), &[4, 6]);
        store.iter_mut().for_each(|p| p.value.fill(0.0));
        let (out, _) = bi.forward(&store, &x).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilstm_palindrome_symmetry_with_tied_weights() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let bi = BiLstm::new(&mut store, "bi", 2, 3, true, &mut r).unwrap();
        let w = store.value(bi.forward.w).clone();
        let b = store.value(bi.forward.b).clone();
        *store.value_mut(bi.backward.w) = w;
        *store.value_mut(bi.backward.b) = b;
        let x = Tensor::from_rows(&[[0.3, -0.2], [1.0, 0.5], [-0.7, 0.1], [1.0, 0.5], [0.3, -0.2]])
            .unwrap();
        let (out, _) = bi.forward(&store, &x).unwrap();
        let t = x.rows();
        for i in 0..t {
            let a = out.row(i);
            let b = out.row(t - 1 - i);
            assert_eq!(&a[..3], &b[3..]);
            assert_eq!(&a[3..], &b[..3]);
        }
    }

    #[test]
    fn shape_errors() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let lstm = Lstm::new(&mut store, "l", 3, 4, true, &mut r).unwrap();
        assert!(lstm.forward(&store, &Tensor::zeros(&[2, 2]), &[0.0; 4], &[0.0; 4]).is_err());
        assert!(lstm.forward(&store, &Tensor::zeros(&[0, 3]), &[0.0; 4], &[0.0; 4]).is_err());
        assert!(lstm.forward(&store, &Tensor::zeros(&[1, 3]), &[0.0; 3], &[0.0; 4]).is_err());
    }
}
