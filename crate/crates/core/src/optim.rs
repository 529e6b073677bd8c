//! Parameter updates: Adam (default) and plain SGD, both with decoupled
//! weight decay.

use crate::params::ParameterSet;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Update rule selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptAlgo {
    #[default]
    Adam,
    Sgd,
}

/// Optimizer state: hyperparameters plus per-parameter moment tensors.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub algo: OptAlgo,
    pub learning_rate: f32,
    pub weight_decay: f32,
    beta1: f32,
    beta2: f32,
    epsilon: f32,
    step_count: u64,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

impl Optimizer {
    pub fn new(algo: OptAlgo, learning_rate: f32, weight_decay: f32) -> Self {
        Optimizer {
            algo,
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn adam(learning_rate: f32, weight_decay: f32) -> Self {
        Self::new(OptAlgo::Adam, learning_rate, weight_decay)
    }

    pub fn sgd(learning_rate: f32, weight_decay: f32) -> Self {
        Self::new(OptAlgo::Sgd, learning_rate, weight_decay)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update from the accumulated gradients, then zero them.
    ///
    /// Decay is decoupled: `value ← value · (1 − lr·λ)` before the
    /// gradient-driven update.
    pub fn step(&mut self, params: &mut ParameterSet) {
        self.step_count += 1;
        let lr = self.learning_rate;
        let decay = 1.0 - lr * self.weight_decay;
        match self.algo {
            OptAlgo::Sgd => {
                for (_, p) in params.iter_mut() {
                    for (v, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *v = *v * decay - lr * g;
                    }
                    p.grad.fill(0.0);
                }
            }
            OptAlgo::Adam => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                for (name, p) in params.iter_mut() {
                    let (m, v) = self
                        .moments
                        .entry(name.clone())
                        .or_insert_with(|| {
                            (Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape()))
                        });
                    for i in 0..p.value.numel() {
                        let g = p.grad.data()[i];
                        let mi = self.beta1 * m.data()[i] + (1.0 - self.beta1) * g;
                        let vi = self.beta2 * v.data()[i] + (1.0 - self.beta2) * g * g;
                        m.data_mut()[i] = mi;
                        v.data_mut()[i] = vi;
                        let m_hat = mi / bc1;
                        let v_hat = vi / bc2;
                        let val = p.value.data()[i];
                        p.value.data_mut()[i] =
                            val * decay - lr * m_hat / (v_hat.sqrt() + self.epsilon);
                    }
                    p.grad.fill(0.0);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(data: Vec<f32>) -> ParameterSet {
        let mut ps = ParameterSet::new();
        let n = data.len();
        ps.insert("p", Tensor::from_vec(&[n], data).unwrap());
        ps
    }

    #[test]
    fn zero_gradient_no_decay_leaves_params_unchanged() {
        let mut ps = one_param(vec![1.0, -2.0]);
        let mut opt = Optimizer::adam(0.1, 0.0);
        opt.step(&mut ps);
        assert_eq!(ps.value("p").unwrap().data(), &[1.0, -2.0]);
    }

    #[test]
    fn sgd_single_step() {
        // lr=0.1, grad=[1,−2], param=[0,0], λ=0 → [−0.1, 0.2]
        let mut ps = one_param(vec![0.0, 0.0]);
        ps.accumulate_grad("p", &Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap())
            .unwrap();
        let mut opt = Optimizer::sgd(0.1, 0.0);
        opt.step(&mut ps);
        let v = ps.value("p").unwrap().data();
        assert!((v[0] + 0.1).abs() < 1e-7);
        assert!((v[1] - 0.2).abs() < 1e-7);
    }

    #[test]
    fn decay_only_step() {
        // λ=0.005, lr=0.001, zero gradient, param=[1] → [0.999995]
        let mut ps = one_param(vec![1.0]);
        let mut opt = Optimizer::adam(0.001, 0.005);
        opt.step(&mut ps);
        let v = ps.value("p").unwrap().data()[0];
        assert!((v - 0.999995).abs() < 1e-7, "got {v}");
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut ps = one_param(vec![0.5, 0.25]);
        ps.accumulate_grad("p", &Tensor::from_vec(&[2], vec![3.0, -4.0]).unwrap())
            .unwrap();
        let mut opt = Optimizer::adam(0.0, 0.01);
        opt.step(&mut ps);
        assert_eq!(ps.value("p").unwrap().data(), &[0.5, 0.25]);
    }

    #[test]
    fn gradients_zeroed_after_step() {
        let mut ps = one_param(vec![0.0]);
        ps.accumulate_grad("p", &Tensor::from_vec(&[1], vec![1.0]).unwrap())
            .unwrap();
        let mut opt = Optimizer::adam(0.01, 0.0);
        opt.step(&mut ps);
        assert_eq!(ps.get("p").unwrap().grad.data(), &[0.0]);
        assert_eq!(opt.step_count(), 1);
    }
}
