//! Bias-corrected Adam and the step learning-rate schedule.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tape::ParamStore;
use crate::tensor::Tensor;

pub const BASE_LR: f64 = 1e-3;
pub const DECAY_EPOCH: usize = 30;

/// `base` for epochs `[0, 30)`, `base / 10` afterwards.
pub fn lr_at_epoch(epoch: usize) -> f64 {
    lr_schedule(BASE_LR, epoch)
}

pub fn lr_schedule(base: f64, epoch: usize) -> f64 {
    if epoch < DECAY_EPOCH {
        base
    } else {
        base * 0.1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T = f32> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(store: &ParamStore<T>, lr: f64) -> Self {
        let zeros = || store.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update of every parameter from its accumulated gradient.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        if self.m.len() != store.len() {
            return Err(Error::contract("optimizer state does not match the parameter set"));
        }
        if let Some((_, p)) = store.iter().find(|(_, p)| !p.has_grad()) {
            return Err(Error::contract(format!("parameter {} has no gradient", p.name)));
        }
        self.t += 1;
        let t = self.t as i32;
        let step = T::from_f64(self.lr / (1.0 - libm::pow(self.beta1, t as f64)));
        let v_corr = T::from_f64(1.0 / libm::sqrt(1.0 - libm::pow(self.beta2, t as f64)));
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let eps = T::from_f64(self.eps);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let (pv, g) = (p.value.data_mut(), p.grad.data());
            for (((w, &g), m), v) in pv.iter_mut().zip(g).zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + c1 * g;
                *v = b2 * *v + c2 * g * g;
                *w -= step * *m / (v.sqrt() * v_corr + eps);
            }
        }
        Ok(())
    }
}
