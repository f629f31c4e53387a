//! Uniform tensor-in/tensor-out view of the kernels, used by the gradient
//! checker and the CLI verification suite.

use crate::error::{shape_err, Result};
use crate::tensor::backward::{self as bw, TiePolicy};
use crate::tensor::{ops, Matrix, Tensor};
use crate::Scalar;

/// A function of several tensors with a hand-written vector-Jacobian product.
pub trait Differentiable<T: Scalar> {
    fn name(&self) -> String;

    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>>;

    /// Gradient of `sum_k <upstream[k], forward(inputs)[k]>` with respect to
    /// every input, in input order.
    fn vjp(&self, inputs: &[Tensor<T>], upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>>;
}

/// Kernel identifier.
///
/// Vector and matrix operands travel as tensors: a vector of length `k` is
/// `[1,1,1,k]` and an `r×c` matrix is `[1,1,r,c]`. Inputs per variant:
///
/// | op | inputs | outputs |
/// |----|--------|---------|
/// | `GlobalAvgPool`, `GlobalMaxPool`, `Sigmoid`, `Relu` | x | 1 |
/// | `Conv1dChannels` | w `[N,C,1,1]`, kernel | 1 |
/// | `Conv2d` | x, kernel `[Co,Ci,kh,kw]`, bias | 1 |
/// | `MaxPool2d` | x | 1 |
/// | `Dense` | x, weight, bias | 1 |
/// | `BroadcastMul` | x, multiplier | 1 |
/// | `ConcatChannels` | a, b | 1 |
/// | `ChannelStats` | x | 2 (max, mean) |
///
/// Max-based kernels reject exact ties with `NotDifferentiable`; the blocks
/// in [`crate::attention`] call the backward kernels directly with the
/// first-index rule instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    GlobalAvgPool,
    GlobalMaxPool,
    Conv1dChannels,
    Conv2d { pad: usize },
    MaxPool2d { k: usize, stride: usize, pad: usize },
    Dense,
    Sigmoid,
    Relu,
    BroadcastMul,
    ConcatChannels,
    ChannelStats,
}

impl Op {
    pub fn arity(&self) -> usize {
        match self {
            Op::Conv2d { .. } | Op::Dense => 3,
            Op::Conv1dChannels | Op::BroadcastMul | Op::ConcatChannels => 2,
            _ => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Op::GlobalAvgPool => "global_avg_pool",
            Op::GlobalMaxPool => "global_max_pool",
            Op::Conv1dChannels => "conv1d_channels",
            Op::Conv2d { .. } => "conv2d",
            Op::MaxPool2d { .. } => "maxpool2d",
            Op::Dense => "dense",
            Op::Sigmoid => "sigmoid",
            Op::Relu => "relu",
            Op::BroadcastMul => "broadcast_mul",
            Op::ConcatChannels => "concat_channels",
            Op::ChannelStats => "channel_stats",
        }
    }
}

fn vector_of<T: Scalar>(t: &Tensor<T>) -> Result<&[T]> {
    let s = t.shape();
    if s.n != 1 || s.c != 1 || s.h != 1 {
        return shape_err(format!("expected a [1,1,1,k] vector, got {s}"));
    }
    Ok(t.data())
}

impl<T: Scalar> Differentiable<T> for Op {
    fn name(&self) -> String {
        self.label().to_string()
    }

    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        if inputs.len() != self.arity() {
            return shape_err(format!("{} takes {} inputs, got {}", self.label(), self.arity(), inputs.len()));
        }
        let x = &inputs[0];
        let out = match *self {
            Op::GlobalAvgPool => ops::global_avg_pool(x)?,
            Op::GlobalMaxPool => ops::global_max_pool(x)?,
            Op::Conv1dChannels => ops::conv1d_channels(x, vector_of(&inputs[1])?)?,
            Op::Conv2d { pad } => ops::conv2d(x, &inputs[1], vector_of(&inputs[2])?, pad)?,
            Op::MaxPool2d { k, stride, pad } => ops::maxpool2d(x, k, stride, pad)?,
            Op::Dense => {
                let w = Matrix::from_tensor(&inputs[1])?;
                Tensor::from_vec(ops::dense(vector_of(x)?, &w, vector_of(&inputs[2])?)?)
            }
            Op::Sigmoid => ops::sigmoid(x),
            Op::Relu => ops::relu(x),
            Op::BroadcastMul => ops::broadcast_mul(x, &inputs[1])?,
            Op::ConcatChannels => ops::concat_channels(x, &inputs[1])?,
            Op::ChannelStats => {
                let (mx, mn) = ops::channel_stats(x)?;
                return Ok(vec![mx, mn]);
            }
        };
        Ok(vec![out])
    }

    fn vjp(&self, inputs: &[Tensor<T>], upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        if inputs.len() != self.arity() {
            return shape_err(format!("{} takes {} inputs, got {}", self.label(), self.arity(), inputs.len()));
        }
        let outputs = if matches!(self, Op::ChannelStats) { 2 } else { 1 };
        if upstream.len() != outputs {
            return shape_err(format!("{} has {outputs} outputs, got {} upstream gradients", self.label(), upstream.len()));
        }
        let x = &inputs[0];
        let g = &upstream[0];
        Ok(match *self {
            Op::GlobalAvgPool => vec![bw::global_avg_pool_backward(x.shape(), g)?],
            Op::GlobalMaxPool => vec![bw::global_max_pool_backward(x, g, TiePolicy::Reject)?],
            Op::Conv1dChannels => {
                let (gw, gk) = bw::conv1d_channels_backward(x, vector_of(&inputs[1])?, g)?;
                vec![gw, Tensor::from_vec(gk)]
            }
            Op::Conv2d { pad } => {
                if vector_of(&inputs[2])?.len() != inputs[1].shape().n {
                    return shape_err("conv2d bias length mismatch");
                }
                let grads = bw::conv2d_backward(x, &inputs[1], pad, g)?;
                vec![grads.input, grads.kernel, Tensor::from_vec(grads.bias)]
            }
            Op::MaxPool2d { k, stride, pad } => vec![bw::maxpool2d_backward(x, k, stride, pad, g, TiePolicy::Reject)?],
            Op::Dense => {
                let w = Matrix::from_tensor(&inputs[1])?;
                let grads = bw::dense_backward(vector_of(x)?, &w, vector_of(g)?)?;
                vec![Tensor::from_vec(grads.input), grads.weight.to_tensor(), Tensor::from_vec(grads.bias)]
            }
            Op::Sigmoid => vec![bw::sigmoid_backward(&ops::sigmoid(x), g)?],
            Op::Relu => vec![bw::relu_backward(x, g)?],
            Op::BroadcastMul => {
                let (gx, gw) = bw::broadcast_mul_backward(x, &inputs[1], g)?;
                vec![gx, gw]
            }
            Op::ConcatChannels => {
                let (ga, gb) = bw::concat_channels_backward(x.shape().c, g)?;
                vec![ga, gb]
            }
            Op::ChannelStats => vec![bw::channel_stats_backward(x, g, &upstream[1], TiePolicy::Reject)?],
        })
    }
}

/// Vector-Jacobian product of `op` at `inputs`.
pub fn vjp<T: Scalar>(op: Op, inputs: &[Tensor<T>], upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
    op.vjp(inputs, upstream)
}
