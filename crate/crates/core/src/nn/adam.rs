use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::{Error, Result};

/// Bias-corrected Adam moments for every entry of one [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(store: &ParamStore, learning_rate: f64) -> Self {
        let zeros = || store.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        AdamState {
            m: zeros(),
            v: zeros(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            learning_rate,
        }
    }

    /// Applies one update to the trainable entries, then zeroes every
    /// gradient slot. Frozen entries are never touched.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if self.m.len() != store.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer tracks {} parameters, store has {}",
                self.m.len(),
                store.len()
            )));
        }
        if let Some(bad) = store
            .iter()
            .find(|p| p.trainable && !p.grad.is_finite())
        {
            return Err(Error::NonFiniteGradient(bad.name.clone()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if !p.trainable {
                continue;
            }
            let g = p.grad.data();
            let theta = p.value.data_mut();
            for (((th, &gi), mi), vi) in theta
                .iter_mut()
                .zip(g)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *th -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        store.zero_grads();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(trainable: bool, grad: f64) -> ParamStore {
        let mut s = ParamStore::new();
        let id = s.add("theta", Tensor::zeros(&[1]), trainable).unwrap();
        s.get_mut(id).grad = Tensor::vector(vec![grad]);
        s
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut s = one_param(true, 0.5);
        let mut adam = AdamState::new(&s, 0.001);
        adam.step(&mut s).unwrap();
        // m̂ = 0.5, v̂ = 0.25 after bias correction
        let expected = -0.001 * 0.5 / (0.25f64.sqrt() + 1e-8);
        let theta = s.iter().next().unwrap().value.data()[0];
        assert_eq!(theta, expected);
        assert!((theta + 0.000999998).abs() < 1e-8);
        assert_eq!(adam.t, 1);
        assert_eq!(s.iter().next().unwrap().grad.data()[0], 0.0);
    }

    #[test]
    fn zero_gradient_leaves_params_but_counts_step() {
        let mut s = one_param(true, 0.0);
        let mut adam = AdamState::new(&s, 0.001);
        adam.step(&mut s).unwrap();
        adam.step(&mut s).unwrap();
        assert_eq!(s.iter().next().unwrap().value.data()[0], 0.0);
        assert_eq!(adam.t, 2);
    }

    #[test]
    fn frozen_entry_is_not_updated() {
        let mut s = one_param(false, 3.0);
        let mut adam = AdamState::new(&s, 0.001);
        adam.step(&mut s).unwrap();
        assert_eq!(s.iter().next().unwrap().value.data()[0], 0.0);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut s = one_param(true, f64::NAN);
        let mut adam = AdamState::new(&s, 0.001);
        assert!(matches!(adam.step(&mut s), Err(Error::NonFiniteGradient(_))));
        assert_eq!(adam.t, 0);
    }
}
