//! Dense numeric core: tensors, activations, the peephole LSTM, dense layers,
//! losses, Adam and a finite-difference gradient checker.

pub mod activation;
pub mod adam;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod params;
pub mod tensor;

pub use activation::{sigmoid, softmax, Activation};
pub use adam::{adam_step, AdamState};
pub use dense::{
    dense_backward, dense_backward_batch, dense_backward_preactivation, dense_forward, dense_forward_batch, DenseParams,
};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport};
pub use loss::{kl_logit_gradient, kl_loss, kl_softmax_gradient, mmse_gradient, mmse_loss, mse, KL_FLOOR};
pub use lstm::{
    lstm_backward_batch, lstm_backward_sequence, lstm_cell_forward, lstm_forward_batch,
    lstm_forward_sequence, LstmCache, LstmCellParams, LstmState,
};
pub use params::{ParamRng, ParamSet};
pub use tensor::Tensor2;
