use crate::autodiff::ParamStore;
use crate::error::{shape_err, Error, Result};
use crate::tensor::DenseTensor;

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

/// Bias-corrected Adam with one pair of moment tensors per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<DenseTensor>,
    v: Vec<DenseTensor>,
}

impl Adam {
    /// Zero moments shaped like the parameters in `store`.
    pub fn new(lr: f64, store: &ParamStore) -> Self {
        let zeros: Vec<DenseTensor> = store
            .iter()
            .map(|p| DenseTensor::from_parts(p.value.shape().to_vec(), vec![0.0; p.value.len()]))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Rebuilds a saved state; moment lists must pair up.
    pub fn from_state(lr: f64, betas: (f64, f64), eps: f64, step: u64, m: Vec<DenseTensor>, v: Vec<DenseTensor>) -> Result<Self> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.shape() != b.shape()) {
            return Err(shape_err!("first and second moments do not pair up"));
        }
        Ok(Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps,
            step,
            m,
            v,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[DenseTensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[DenseTensor] {
        &self.v
    }

    /// One update from the accumulated gradients, which are then zeroed.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if store.len() != self.m.len() {
            return Err(shape_err!("optimizer tracks {} tensors, store has {}", self.m.len(), store.len()));
        }
        self.step = self
            .step
            .checked_add(1)
            .ok_or_else(|| Error::Numeric("Adam step counter overflow".into()))?;
        let t = self.step as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if p.value.shape() != m.shape() {
                return Err(shape_err!("moment shape {:?} does not match `{}` {:?}", m.shape(), p.name, p.value.shape()));
            }
            let vals = p.value.data_mut();
            for (((x, g), m), v) in vals.iter_mut().zip(p.grad.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *x -= lr * mh / (vh.sqrt() + eps);
            }
        }
        store.zero_grad();
        Ok(())
    }
}
