//! Named trainable parameters with gradient accumulators.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::collections::BTreeMap;

/// One named parameter: its value and the gradient accumulated by the
/// last backward pass. Shapes always match.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

/// Ordered map of named parameters.
///
/// Iteration order is the lexicographic name order, so checkpoints and
/// optimizer sweeps are deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParameterSet {
    entries: BTreeMap<String, Param>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter. The gradient accumulator starts at zero.
    pub fn insert(&mut self, name: &str, value: Tensor) {
        let grad = Tensor::zeros(value.shape());
        self.entries.insert(name.to_string(), Param { value, grad });
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Param> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter {name:?}")))
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.get(name)?.value)
    }

    /// Add `grad` into the named parameter's accumulator.
    pub fn accumulate_grad(&mut self, name: &str, grad: &Tensor) -> Result<()> {
        let p = self.get_mut(name)?;
        if p.value.shape() != grad.shape() {
            return Err(Error::Shape(format!(
                "gradient shape {:?} does not match parameter {name:?} shape {:?}",
                grad.shape(),
                p.value.shape()
            )));
        }
        p.grad.add_assign(grad);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param)> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar values across all parameters.
    pub fn num_values(&self) -> usize {
        self.entries.values().map(|p| p.value.numel()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_and_zero() {
        let mut ps = ParameterSet::new();
        ps.insert("w", Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap());
        ps.accumulate_grad("w", &Tensor::from_vec(&[2], vec![0.5, 0.5]).unwrap())
            .unwrap();
        assert_eq!(ps.get("w").unwrap().grad.data(), &[0.5, 0.5]);
        ps.zero_grads();
        assert_eq!(ps.get("w").unwrap().grad.data(), &[0.0, 0.0]);
    }

    #[test]
    fn grad_shape_checked() {
        let mut ps = ParameterSet::new();
        ps.insert("w", Tensor::zeros(&[2]));
        let bad = Tensor::zeros(&[3]);
        assert!(ps.accumulate_grad("w", &bad).is_err());
    }

    #[test]
    fn iteration_is_sorted_by_name() {
        let mut ps = ParameterSet::new();
        ps.insert("b", Tensor::zeros(&[1]));
        ps.insert("a", Tensor::zeros(&[1]));
        let names: Vec<_> = ps.names().cloned().collect();
        assert_eq!(names, vec!["a", "b"]);
    }
}
