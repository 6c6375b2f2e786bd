//! Dense f64 tensor kernels with hand-written backward passes.

pub mod activation;
pub mod adam;
pub mod conv;
pub mod convlstm;
mod gemm;
pub mod gradcheck;
pub mod loss;
pub mod tensor;

pub use adam::{adam_update, clip_global_norm, AdamState};
pub use conv::{
    conv2d_backward, conv2d_forward, conv_transpose2d_backward, conv_transpose2d_forward,
    ConvGrads, ConvKernelSet, ConvTransposeKernelSet,
};
pub use convlstm::{
    convlstm_backward, convlstm_forward_sequence, convlstm_step, ConvLstmCellParams, ConvLstmGrads,
    ConvLstmStepCache, ConvLstmTrace, Gate,
};
pub use loss::mse_loss;
pub use tensor::Tensor3;

use rand::Rng;

/// Fills `values` with `uniform(−1/√fan_in, 1/√fan_in)`.
pub fn init_uniform(values: &mut [f64], fan_in: usize, rng: &mut impl Rng) {
    let s = 1.0 / (fan_in.max(1) as f64).sqrt();
    values.iter_mut().for_each(|v| *v = rng.gen_range(-s..s));
}
