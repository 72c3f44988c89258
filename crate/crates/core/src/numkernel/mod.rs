//! Dense numerical kernel shared by both graph models: a row-major tensor,
//! activations, an LSTM cell with hand-written backward pass, an
//! adaptive-moment optimizer and a finite-difference gradient checker.

mod activation;
mod gradcheck;
mod lstm;
mod params;
mod tensor;

pub use activation::{
    cross_entropy, cross_entropy_logit_grad, elu, elu_grad, leaky_relu, leaky_relu_grad, sigmoid,
    softmax, softmax_backward, Activation, LEAKY_SLOPE,
};
pub use gradcheck::grad_check;
pub use lstm::{
    insert_lstm_params, lstm_backward, lstm_forward, lstm_step, LstmGrads, LstmInput, LstmState,
    LstmStepCache, LstmWeights, LSTM_BIAS, LSTM_W_HIDDEN, LSTM_W_INPUT,
};
pub use params::{adam_update, ParamSet, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tensor::{axpy, dot, Tensor2};
