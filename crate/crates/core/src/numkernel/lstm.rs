use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::params::ParamSet;
use super::tensor::Tensor2;
use crate::error::{Error, Result};

pub const LSTM_W_INPUT: &str = "lstm.w_input";
pub const LSTM_W_HIDDEN: &str = "lstm.w_hidden";
pub const LSTM_BIAS: &str = "lstm.bias";

/// Hidden and cell vectors of an LSTM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(dim: usize) -> Self {
        LstmState {
            hidden: vec![0.0; dim],
            cell: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.hidden.len()
    }
}

/// Input to one LSTM step. `OneHot(k)` is the dense unit vector `e_k`
/// without materializing it.
#[derive(Debug, Clone, Copy)]
pub enum LstmInput<'a> {
    Dense(&'a [f64]),
    OneHot(usize),
}

/// Borrowed view of the three LSTM tensors. Gate rows are ordered
/// input, forget, candidate, output.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    pub w_input: &'a Tensor2,
    pub w_hidden: &'a Tensor2,
    pub bias: &'a Tensor2,
}

impl<'a> LstmWeights<'a> {
    pub fn from_params(params: &'a ParamSet) -> Result<Self> {
        let w = LstmWeights {
            w_input: params.get(LSTM_W_INPUT)?,
            w_hidden: params.get(LSTM_W_HIDDEN)?,
            bias: params.get(LSTM_BIAS)?,
        };
        let h = w.hidden_dim();
        if w.w_hidden.shape() != (4 * h, h)
            || w.bias.shape() != (4 * h, 1)
            || w.w_input.rows() != 4 * h
        {
            return Err(Error::usage("inconsistent LSTM parameter shapes"));
        }
        Ok(w)
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.cols()
    }
}

/// Creates zero-initialized LSTM parameters inside `params`.
pub fn insert_lstm_params(params: &mut ParamSet, input_dim: usize, hidden_dim: usize) -> Result<()> {
    params.insert(LSTM_W_INPUT, Tensor2::zeros(4 * hidden_dim, input_dim))?;
    params.insert(LSTM_W_HIDDEN, Tensor2::zeros(4 * hidden_dim, hidden_dim))?;
    params.insert(LSTM_BIAS, Tensor2::zeros(4 * hidden_dim, 1))?;
    Ok(())
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    input: CachedInput,
    prev: LstmState,
    /// Post-activation gates, `4H` long.
    gates: Vec<f64>,
    tanh_cell: Vec<f64>,
}

#[derive(Debug, Clone)]
enum CachedInput {
    Dense(Vec<f64>),
    OneHot(usize),
}

/// Gradient accumulators for the three LSTM tensors.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_input: Tensor2,
    pub w_hidden: Tensor2,
    pub bias: Tensor2,
}

impl LstmGrads {
    pub fn zeros_like(w: &LstmWeights<'_>) -> Self {
        LstmGrads {
            w_input: Tensor2::zeros(w.w_input.rows(), w.w_input.cols()),
            w_hidden: Tensor2::zeros(w.w_hidden.rows(), w.w_hidden.cols()),
            bias: Tensor2::zeros(w.bias.rows(), 1),
        }
    }

    pub fn add_into(&self, grads: &mut ParamSet) -> Result<()> {
        grads.get_mut(LSTM_W_INPUT)?.add_assign(&self.w_input);
        grads.get_mut(LSTM_W_HIDDEN)?.add_assign(&self.w_hidden);
        grads.get_mut(LSTM_BIAS)?.add_assign(&self.bias);
        Ok(())
    }
}

/// One LSTM cell update; `state` is not modified.
pub fn lstm_step(state: &LstmState, input: LstmInput<'_>, params: &ParamSet) -> Result<LstmState> {
    let w = LstmWeights::from_params(params)?;
    lstm_forward(state, input, &w).map(|(s, _)| s)
}

pub fn lstm_forward(
    state: &LstmState,
    input: LstmInput<'_>,
    w: &LstmWeights<'_>,
) -> Result<(LstmState, LstmStepCache)> {
    let h = w.hidden_dim();
    if state.hidden.len() != h || state.cell.len() != h {
        return Err(Error::usage(format!(
            "LSTM state dim {} does not match hidden size {h}",
            state.hidden.len()
        )));
    }
    let mut pre = w.bias.data().to_vec();
    let cached = match input {
        LstmInput::Dense(x) => {
            if x.len() != w.input_dim() {
                return Err(Error::usage(format!(
                    "LSTM input dim {} does not match {}",
                    x.len(),
                    w.input_dim()
                )));
            }
            w.w_input.matvec_acc(x, &mut pre);
            CachedInput::Dense(x.to_vec())
        }
        LstmInput::OneHot(k) => {
            if k >= w.input_dim() {
                return Err(Error::usage(format!(
                    "one-hot index {k} out of range {}",
                    w.input_dim()
                )));
            }
            w.w_input.column_acc(k, &mut pre);
            CachedInput::OneHot(k)
        }
    };
    w.w_hidden.matvec_acc(&state.hidden, &mut pre);

    let mut gates = pre;
    for (idx, g) in gates.iter_mut().enumerate() {
        *g = if (2 * h..3 * h).contains(&idx) {
            g.tanh()
        } else {
            sigmoid(*g)
        };
    }
    let mut cell = vec![0.0; h];
    let mut hidden = vec![0.0; h];
    let mut tanh_cell = vec![0.0; h];
    for k in 0..h {
        let (ig, fg, cg, og) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
        cell[k] = fg * state.cell[k] + ig * cg;
        tanh_cell[k] = cell[k].tanh();
        hidden[k] = og * tanh_cell[k];
    }
    let cache = LstmStepCache {
        input: cached,
        prev: state.clone(),
        gates,
        tanh_cell,
    };
    Ok((LstmState { hidden, cell }, cache))
}

/// Backpropagates `(dL/dh, dL/dc)` of a step's output through the cell.
///
/// Accumulates parameter gradients into `grads` and returns the gradient with
/// respect to the previous state, plus the input gradient for dense inputs.
pub fn lstm_backward(
    cache: &LstmStepCache,
    d_hidden: &[f64],
    d_cell: &[f64],
    w: &LstmWeights<'_>,
    grads: &mut LstmGrads,
) -> (LstmState, Option<Vec<f64>>) {
    let h = w.hidden_dim();
    let g = &cache.gates;
    let mut d_pre = vec![0.0; 4 * h];
    let mut d_prev_cell = vec![0.0; h];
    for k in 0..h {
        let (ig, fg, cg, og) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
        let tc = cache.tanh_cell[k];
        let dc = d_cell[k] + d_hidden[k] * og * (1.0 - tc * tc);
        let d_og = d_hidden[k] * tc;
        d_pre[k] = dc * cg * ig * (1.0 - ig);
        d_pre[h + k] = dc * cache.prev.cell[k] * fg * (1.0 - fg);
        d_pre[2 * h + k] = dc * ig * (1.0 - cg * cg);
        d_pre[3 * h + k] = d_og * og * (1.0 - og);
        d_prev_cell[k] = dc * fg;
    }
    for (b, d) in grads.bias.data_mut().iter_mut().zip(&d_pre) {
        *b += d;
    }
    grads.w_hidden.add_outer(&d_pre, &cache.prev.hidden, 1.0);
    let d_input = match &cache.input {
        CachedInput::Dense(x) => {
            grads.w_input.add_outer(&d_pre, x, 1.0);
            let mut dx = vec![0.0; x.len()];
            w.w_input.t_matvec_acc(&d_pre, &mut dx);
            Some(dx)
        }
        CachedInput::OneHot(k) => {
            grads.w_input.add_to_column(*k, &d_pre, 1.0);
            None
        }
    };
    let mut d_prev_hidden = vec![0.0; h];
    w.w_hidden.t_matvec_acc(&d_pre, &mut d_prev_hidden);
    (
        LstmState {
            hidden: d_prev_hidden,
            cell: d_prev_cell,
        },
        d_input,
    )
}
