use rand::Rng;

use crate::attention::{init_tensor, single_input};
use crate::error::{shape_err, Result};
use crate::tensor::backward::{self as bw, TiePolicy};
use crate::tensor::{ops, Differentiable, Shape, Tensor};
use crate::Scalar;

pub const SAM_KERNEL: usize = 7;
pub const SAM_PAD: usize = 3;

/// Spatial attention: a 7×7 convolution over the stacked per-pixel channel
/// maximum and mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SamParams<T> {
    kernel: Tensor<T>,
    bias: T,
}

impl<T: Scalar> SamParams<T> {
    pub fn new(kernel: Tensor<T>, bias: T) -> Result<Self> {
        let expected = Shape::new(1, 2, SAM_KERNEL, SAM_KERNEL);
        if kernel.shape() != expected {
            return shape_err(format!("SAM kernel must be {expected}, got {}", kernel.shape()));
        }
        Ok(Self { kernel, bias })
    }

    pub fn zeros() -> Self {
        Self { kernel: Tensor::zeros([1, 2, SAM_KERNEL, SAM_KERNEL]), bias: T::zero() }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let kernel = init_tensor([1, 2, SAM_KERNEL, SAM_KERNEL], rng);
        let bias = super::init_vec(1, rng)[0];
        Self { kernel, bias }
    }

    pub fn kernel(&self) -> &Tensor<T> {
        &self.kernel
    }

    pub fn bias(&self) -> T {
        self.bias
    }
}

fn stacked<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.h == 0 || s.w == 0 {
        return shape_err(format!("SAM needs a nonempty spatial extent, got {s}"));
    }
    let (mx, mn) = ops::channel_stats(x)?;
    ops::concat_channels(&mx, &mn)
}

/// Spatial weight map in (0, 1), shape `[N,1,H,W]`.
pub fn sam_map<T: Scalar>(x: &Tensor<T>, p: &SamParams<T>) -> Result<Tensor<T>> {
    let z = ops::conv2d(&stacked(x)?, &p.kernel, &[p.bias], SAM_PAD)?;
    Ok(ops::sigmoid(&z))
}

pub fn sam_forward<T: Scalar>(x: &Tensor<T>, p: &SamParams<T>) -> Result<Tensor<T>> {
    ops::broadcast_mul(x, &sam_map(x, p)?)
}

/// Gradient of [`sam_forward`] with respect to `x`.
pub fn sam_backward<T: Scalar>(x: &Tensor<T>, p: &SamParams<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    let st = stacked(x)?;
    let m = ops::sigmoid(&ops::conv2d(&st, &p.kernel, &[p.bias], SAM_PAD)?);
    let (gx, gm) = bw::broadcast_mul_backward(x, &m, g)?;
    let gz = bw::sigmoid_backward(&m, &gm)?;
    let gst = bw::conv2d_backward(&st, &p.kernel, SAM_PAD, &gz)?.input;
    let (g_max, g_mean) = bw::concat_channels_backward(1, &gst)?;
    gx.add(&bw::channel_stats_backward(x, &g_max, &g_mean, TiePolicy::FirstIndex)?)
}

impl<T: Scalar> Differentiable<T> for SamParams<T> {
    fn name(&self) -> String {
        "sam".into()
    }

    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        Ok(vec![sam_forward(single_input(inputs, "sam")?, self)?])
    }

    fn vjp(&self, inputs: &[Tensor<T>], upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let g = single_input(upstream, "sam upstream")?;
        Ok(vec![sam_backward(single_input(inputs, "sam")?, self, g)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_halve_input() {
        let x = Tensor::from_fn([2, 3, 4, 5], |n, c, h, w| (n + c) as f64 - (h * w) as f64 / 7.0);
        assert_eq!(sam_forward(&x, &SamParams::zeros()).unwrap(), x.scale(0.5));
    }

    #[test]
    fn map_shape() {
        let x = Tensor::<f64>::full([2, 3, 4, 5], 1.0);
        assert_eq!(sam_map(&x, &SamParams::zeros()).unwrap().shape(), Shape::new(2, 1, 4, 5));
    }

    #[test]
    fn rejects_wrong_kernel() {
        assert!(SamParams::new(Tensor::<f64>::zeros([1, 2, 5, 5]), 0.0).is_err());
        assert!(SamParams::new(Tensor::<f64>::zeros([1, 3, 7, 7]), 0.0).is_err());
    }
}
