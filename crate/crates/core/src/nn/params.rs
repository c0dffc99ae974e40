use std::collections::HashMap;

use rand::Rng;

use super::Tensor;
use crate::{Error, Result};

/// Index of an entry in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub trainable: bool,
}

/// Named parameters with gradient slots. Entry order is insertion order and
/// is what checkpoints serialize.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateParam(name));
        }
        let id = self.entries.len();
        self.index.insert(name.clone(), id);
        let grad = Tensor::zeros(value.shape());
        self.entries.push(Param {
            name,
            value,
            grad,
            trainable,
        });
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.entries[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.entries.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        for p in &mut self.entries {
            p.trainable = trainable;
        }
    }

    pub fn all_frozen(&self) -> bool {
        self.entries.iter().all(|p| !p.trainable)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.entries {
            p.grad.fill(0.0);
        }
    }

    /// Adds a gradient buffer into the gradient slots.
    pub fn accumulate(&mut self, grads: &GradBuffer) {
        for (p, slot) in self.entries.iter_mut().zip(&grads.slots) {
            if let Some(g) = slot {
                for (a, b) in p.grad.data_mut().iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
    }

    /// L2 norm over the gradients of trainable entries.
    pub fn grad_norm(&self) -> f64 {
        self.entries
            .iter()
            .filter(|p| p.trainable)
            .flat_map(|p| p.grad.data())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales trainable gradients so their joint norm is at most
    /// `max_norm`. Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm.is_finite() {
            let s = max_norm / norm;
            for p in self.entries.iter_mut().filter(|p| p.trainable) {
                p.grad.data_mut().iter_mut().for_each(|g| *g *= s);
            }
        }
        norm
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    pub fn num_trainable_scalars(&self) -> usize {
        self.entries
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    /// Rounds every value to the nearest `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.entries {
            for v in p.value.data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }
}

/// Per-call gradient accumulator shaped like a [`ParamStore`]. Slots are
/// allocated on first write.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    sizes: Vec<usize>,
    slots: Vec<Option<Vec<f64>>>,
}

impl GradBuffer {
    pub fn for_store(store: &ParamStore) -> Self {
        GradBuffer {
            sizes: store.entries.iter().map(|p| p.value.len()).collect(),
            slots: vec![None; store.entries.len()],
        }
    }

    pub fn slot(&mut self, id: ParamId) -> &mut [f64] {
        let n = self.sizes[id.0];
        self.slots[id.0].get_or_insert_with(|| vec![0.0; n])
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.slots[id.0].as_deref()
    }

    pub fn add_assign(&mut self, other: &GradBuffer) {
        for (i, slot) in other.slots.iter().enumerate() {
            if let Some(g) = slot {
                let n = self.sizes[i];
                let dst = self.slots[i].get_or_insert_with(|| vec![0.0; n]);
                for (a, b) in dst.iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.slots.iter_mut().flatten() {
            g.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Xavier/Glorot uniform initialization for a `[fan_out × fan_in]` matrix.
pub fn xavier_uniform<R: Rng + ?Sized>(rng: &mut R, fan_out: usize, fan_in: usize) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, &[fan_out, fan_in], a)
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], bound: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::from_vec(shape, data).expect("shape product matches")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::zeros(&[2]), true).unwrap();
        assert!(matches!(
            s.add("w", Tensor::zeros(&[2]), true),
            Err(Error::DuplicateParam(_))
        ));
    }

    #[test]
    fn clipping_scales_trainable_only() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::zeros(&[2]), true).unwrap();
        let b = s.add("b", Tensor::zeros(&[1]), false).unwrap();
        s.get_mut(a).grad = Tensor::vector(vec![3.0, 4.0]);
        s.get_mut(b).grad = Tensor::vector(vec![100.0]);
        assert_eq!(s.clip_grad_norm(1.0), 5.0);
        assert!((s.get(a).grad.data()[0] - 0.6).abs() < 1e-12);
        assert_eq!(s.get(b).grad.data()[0], 100.0);
    }

    #[test]
    fn grad_buffers_accumulate() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::zeros(&[2]), true).unwrap();
        let _b = s.add("b", Tensor::zeros(&[3]), true).unwrap();
        let mut g1 = GradBuffer::for_store(&s);
        g1.slot(a)[1] = 2.0;
        let mut g2 = GradBuffer::for_store(&s);
        g2.add_assign(&g1);
        g2.add_assign(&g1);
        g2.scale(0.5);
        s.accumulate(&g2);
        assert_eq!(s.get(a).grad.data(), &[0.0, 2.0]);
    }

    #[test]
    fn xavier_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = xavier_uniform(&mut rng, 10, 20);
        let bound = (6.0f64 / 30.0).sqrt();
        assert!(t.data().iter().all(|v| v.abs() <= bound));
    }
}
