//! Dense numeric kernel: matrices, affine layers, GeLU, dropout, MSE, AdamW
//! and the seeded RNG. Every gradient here is hand-derived.

mod activation;
mod adamw;
mod dropout;
mod linear;
mod loss;
mod matrix;
mod rng;
mod summation;

pub use activation::{gelu, gelu_backward, gelu_derivative, gelu_forward};
pub use adamw::{AdamWConfig, AdamWState};
pub use dropout::{check_rate, dropout, DropoutMask};
pub use linear::LinearParams;
pub use loss::mse_loss;
pub use matrix::{gemm, Matrix, Op};
pub use rng::{Rng, RngState};
pub use summation::{exact_mean, exact_sum};

/// Anything owning trainable tensors with matching gradient buffers.
///
/// `visit_params` must visit tensors in the same order on every call; the
/// optimizer keys its moment buffers on that order.
pub trait Parameterized {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64]));
    fn zero_grad(&mut self);
}
