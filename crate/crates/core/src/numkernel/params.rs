use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Named learnable tensors plus the adaptive-moment optimizer state.
///
/// Shapes are fixed once a name is inserted. The optimizer moments are not
/// serialized; a restored checkpoint starts a fresh optimizer.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "BTreeMap<String, Tensor2>", into = "BTreeMap<String, Tensor2>")]
pub struct ParamSet {
    tensors: BTreeMap<String, Tensor2>,
    moments: Moments,
}

impl From<BTreeMap<String, Tensor2>> for ParamSet {
    fn from(tensors: BTreeMap<String, Tensor2>) -> Self {
        ParamSet {
            tensors,
            moments: Moments::default(),
        }
    }
}

impl From<ParamSet> for BTreeMap<String, Tensor2> {
    fn from(p: ParamSet) -> Self {
        p.tensors
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Moments {
    step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl PartialEq for ParamSet {
    fn eq(&self, other: &Self) -> bool {
        self.tensors == other.tensors
    }
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor2) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::usage(format!("duplicate parameter name {name}")));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor2> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::usage(format!("missing parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor2> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::usage(format!("missing parameter {name}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor2)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor2::len).sum()
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> u64 {
        self.moments.step
    }

    /// Same names and shapes, all zeros, no optimizer state.
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), Tensor2::zeros(t.rows(), t.cols())))
                .collect(),
            moments: Moments::default(),
        }
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|((ka, ta), (kb, tb))| ka == kb && ta.shape() == tb.shape())
    }

    pub fn add_assign(&mut self, other: &ParamSet) -> Result<()> {
        if !self.same_layout(other) {
            return Err(Error::usage("parameter set layout mismatch"));
        }
        for (a, b) in self.tensors.values_mut().zip(other.tensors.values()) {
            a.add_assign(b);
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors.values_mut().for_each(|t| t.scale(factor));
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor2::is_finite)
    }

    /// One adaptive-moment step (β1 = 0.9, β2 = 0.999, ε = 1e-8, bias
    /// corrected) applied in place.
    pub fn adam_update(&mut self, grads: &ParamSet, lr: f64) -> Result<()> {
        if !self.same_layout(grads) {
            return Err(Error::usage(
                "gradient names or shapes do not match parameters",
            ));
        }
        if !grads.is_finite() {
            return Err(Error::numeric("non-finite gradient"));
        }
        let moments = &mut self.moments;
        moments.step += 1;
        let t = moments.step as i32;
        let bias1 = 1.0 - ADAM_BETA1.powi(t);
        let bias2 = 1.0 - ADAM_BETA2.powi(t);
        for (name, param) in self.tensors.iter_mut() {
            let grad = grads.tensors[name].data();
            let m = moments
                .first
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; grad.len()]);
            let v = moments
                .second
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; grad.len()]);
            for (((p, &g), mi), vi) in param
                .data_mut()
                .iter_mut()
                .zip(grad)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * g;
                *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }
}

/// Functional form of [`ParamSet::adam_update`].
pub fn adam_update(params: &ParamSet, grads: &ParamSet, lr: f64) -> Result<ParamSet> {
    let mut next = params.clone();
    next.adam_update(grads, lr)?;
    Ok(next)
}
