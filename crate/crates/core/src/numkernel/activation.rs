use crate::error::{Error, Result};

/// Negative slope used by every LeakyReLU in the models.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::usage("softmax of an empty vector"));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("softmax input {bad} is not finite")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

/// Vector-Jacobian product of softmax: given `p = softmax(z)` and `dL/dp`,
/// returns `dL/dz`.
pub fn softmax_backward(probs: &[f64], d_probs: &[f64]) -> Vec<f64> {
    let inner: f64 = probs.iter().zip(d_probs).map(|(p, d)| p * d).sum();
    probs
        .iter()
        .zip(d_probs)
        .map(|(p, d)| p * (d - inner))
        .collect()
}

/// Cross-entropy of a probability vector against a class index, floored to
/// avoid `ln 0`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(1e-300).ln()
}

/// Gradient of `cross_entropy(softmax(z), label)` with respect to `z`.
pub fn cross_entropy_logit_grad(probs: &[f64], label: usize) -> Vec<f64> {
    let mut g = probs.to_vec();
    g[label] -= 1.0;
    g
}

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

#[inline]
pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[inline]
pub fn elu_grad(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise activation applied inside graph attention layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Elu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Elu => elu(x),
        }
    }

    #[inline]
    pub fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Elu => elu_grad(x),
        }
    }
}
