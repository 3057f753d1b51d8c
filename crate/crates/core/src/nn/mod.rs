//! Differentiable building blocks with hand-written backward passes.
//!
//! Every layer caches what its backward pass needs in an explicit trace
//! value; gradients accumulate into the parameter tensors until
//! [`Module::zero_grad`] is called.

pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod optim;
pub mod tensor;

pub use conv::{Conv1d, ConvConfig, ConvStack, ConvTrace};
pub use dense::{Dense, Mlp, MlpTrace};
pub use gradcheck::{grad_check, relative_error, GradCheckConfig, GradCheckReport};
pub use loss::{cross_entropy, mse, mse_grad_into, softmax_cross_entropy_grad};
pub use lstm::{Lstm, LstmLayer, LstmTrace, StackTrace};
pub use optim::{all_params, Adam, AdamConfig};
pub use tensor::{Module, ParamSet, Tensor};

use crate::scalar::Scalar;

#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

#[inline]
pub fn tanh<S: Scalar>(x: S) -> S {
    x.tanh()
}

pub fn relu<S: Scalar>(x: &[S]) -> Vec<S> {
    x.iter().map(|v| v.max(S::zero())).collect()
}

pub fn relu_inplace<S: Scalar>(x: &mut [S]) {
    for v in x {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

/// Masks `grad` where the post-activation output was not positive.
pub fn relu_backward<S: Scalar>(out: &[S], grad: &mut [S]) {
    for (g, o) in grad.iter_mut().zip(out) {
        if *o <= S::zero() {
            *g = S::zero();
        }
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax<S: Scalar>(x: &[S]) -> Vec<S> {
    let m = x.iter().copied().fold(S::neg_infinity(), S::max);
    let e: Vec<S> = x.iter().map(|v| (*v - m).exp()).collect();
    let z: S = e.iter().copied().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Given softmax output `p` and upstream `dp`, returns the gradient on the logits.
pub fn softmax_backward<S: Scalar>(p: &[S], dp: &[S]) -> Vec<S> {
    let s: S = p.iter().zip(dp).map(|(a, b)| *a * *b).sum();
    p.iter().zip(dp).map(|(pi, di)| *pi * (*di - s)).collect()
}
