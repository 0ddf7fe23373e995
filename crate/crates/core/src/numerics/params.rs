use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Tensor drawn from `N(0, std^2)`.
pub fn normal_init<R: Rng + ?Sized>(rng: &mut R, shape: Vec<usize>, std: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let dist = Normal::new(0.0, std).expect("finite std");
    let data = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape, data).expect("non-empty shape").with_grad()
}

/// Ordered, named parameter tensors of one network.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> usize {
        assert!(self.index_of(name).is_none(), "duplicate parameter {name}");
        self.names.push(name.to_string());
        self.tensors.push(tensor.with_grad());
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn tensor(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter_mut())
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every tensor on `tape`; as trainable leaves when `trainable`,
    /// otherwise as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| {
                if trainable {
                    tape.leaf(t)
                } else {
                    tape.constant(Tensor::new(t.shape().to_vec(), t.data().to_vec()).unwrap())
                }
            })
            .collect()
    }

    /// Copies gradients for the bound variables back onto the tensors.
    pub fn collect_grads(&mut self, tape: &Tape, vars: &[Var]) {
        for (t, &v) in self.tensors.iter_mut().zip(vars) {
            tape.store_grad(v, t);
        }
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.zero_grad();
        }
    }

    pub fn new_adam_states(&self, cfg: AdamConfig) -> Vec<AdamState> {
        self.tensors.iter().map(|t| AdamState::new(t.len(), cfg)).collect()
    }

    pub fn adam_step(&mut self, states: &mut [AdamState]) -> Result<()> {
        if states.len() != self.tensors.len() {
            return Err(Error::Contract(format!(
                "{} optimizer states for {} parameters",
                states.len(),
                self.tensors.len()
            )));
        }
        for (t, s) in self.tensors.iter_mut().zip(states) {
            adam_step(t, s)?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Replaces values from `other`, which must hold the same names and shapes.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Checkpoint(format!(
                "parameter names differ: expected {:?}, found {:?}",
                self.names, other.names
            )));
        }
        for ((name, t), o) in self.names.iter().zip(self.tensors.iter_mut()).zip(&other.tensors) {
            if t.shape() != o.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: shape {:?} does not match {:?}",
                    o.shape(),
                    t.shape()
                )));
            }
            t.data_mut().copy_from_slice(o.data());
        }
        Ok(())
    }
}
