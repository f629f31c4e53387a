use rand::Rng;

use crate::attention::{init_vec, single_input};
use crate::error::{shape_err, Error, Result};
use crate::tensor::backward::{self as bw};
use crate::tensor::{ops, Differentiable, Tensor};
use crate::Scalar;

pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_B_OFFSET: f64 = 1.0;

/// Adaptive kernel size: `|log2(C)/gamma + b/gamma|` rounded up to the next
/// odd integer, never below 3.
pub fn eca_kernel_size(channels: usize, gamma: f64, b_offset: f64) -> Result<usize> {
    if channels == 0 {
        return shape_err("eca_kernel_size needs at least one channel");
    }
    if !(gamma > 0.0 && gamma.is_finite()) || !b_offset.is_finite() {
        return Err(Error::InvalidKernel(format!("gamma {gamma} / offset {b_offset} invalid")));
    }
    let t = ((channels as f64).log2() / gamma + b_offset / gamma).abs();
    let mut k = t.ceil() as usize;
    if k % 2 == 0 {
        k += 1;
    }
    Ok(k.max(3))
}

/// ECA parameters: the cross-channel 1-D kernel plus the constants of the
/// adaptive size rule it was sized with.
#[derive(Debug, Clone, PartialEq)]
pub struct EcaParams<T> {
    kernel: Vec<T>,
    gamma: T,
    b_offset: T,
}

impl<T: Scalar> EcaParams<T> {
    pub fn new(kernel: Vec<T>, gamma: T, b_offset: T) -> Result<Self> {
        ops::check_odd_kernel(&kernel)?;
        if !(gamma > T::zero()) {
            return Err(Error::InvalidKernel(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { kernel, gamma, b_offset })
    }

    /// Explicit kernel with the default size-rule constants.
    pub fn with_kernel(kernel: Vec<T>) -> Result<Self> {
        Self::new(kernel, T::lit(DEFAULT_GAMMA), T::lit(DEFAULT_B_OFFSET))
    }

    /// All-zero kernel of the adaptive size for `channels`.
    pub fn zeros(channels: usize) -> Result<Self> {
        let k = eca_kernel_size(channels, DEFAULT_GAMMA, DEFAULT_B_OFFSET)?;
        Self::with_kernel(vec![T::zero(); k])
    }

    pub fn random<R: Rng + ?Sized>(channels: usize, rng: &mut R) -> Result<Self> {
        let k = eca_kernel_size(channels, DEFAULT_GAMMA, DEFAULT_B_OFFSET)?;
        Self::with_kernel(init_vec(k, rng))
    }

    pub fn kernel(&self) -> &[T] {
        &self.kernel
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn b_offset(&self) -> T {
        self.b_offset
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let c = x.shape().c;
        if c == 0 || self.kernel.len() > 2 * c - 1 {
            return shape_err(format!("ECA kernel of length {} too long for {c} channels", self.kernel.len()));
        }
        Ok(())
    }
}

/// Channel weights `sigmoid(conv1d(avgpool(x)))`, shape `[N,C,1,1]`.
pub fn eca_weights<T: Scalar>(x: &Tensor<T>, p: &EcaParams<T>) -> Result<Tensor<T>> {
    p.check_input(x)?;
    let pooled = ops::global_avg_pool(x)?;
    Ok(ops::sigmoid(&ops::conv1d_channels(&pooled, &p.kernel)?))
}

pub fn eca_forward<T: Scalar>(x: &Tensor<T>, p: &EcaParams<T>) -> Result<Tensor<T>> {
    ops::broadcast_mul(x, &eca_weights(x, p)?)
}

/// Gradient of [`eca_forward`] with respect to `x`.
pub fn eca_backward<T: Scalar>(x: &Tensor<T>, p: &EcaParams<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    let w = eca_weights(x, p)?;
    let (gx_direct, gw) = bw::broadcast_mul_backward(x, &w, g)?;
    let gz = bw::sigmoid_backward(&w, &gw)?;
    let pooled = ops::global_avg_pool(x)?;
    let (gpooled, _) = bw::conv1d_channels_backward(&pooled, &p.kernel, &gz)?;
    gx_direct.add(&bw::global_avg_pool_backward(x.shape(), &gpooled)?)
}

impl<T: Scalar> Differentiable<T> for EcaParams<T> {
    fn name(&self) -> String {
        "eca".into()
    }

    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        Ok(vec![eca_forward(single_input(inputs, "eca")?, self)?])
    }

    fn vjp(&self, inputs: &[Tensor<T>], upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let g = single_input(upstream, "eca upstream")?;
        Ok(vec![eca_backward(single_input(inputs, "eca")?, self, g)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_size_rule() {
        assert_eq!(eca_kernel_size(256, 2.0, 1.0).unwrap(), 5);
        assert_eq!(eca_kernel_size(2, 2.0, 1.0).unwrap(), 3);
        assert_eq!(eca_kernel_size(512, 2.0, 1.0).unwrap(), 5);
        assert_eq!(eca_kernel_size(1, 2.0, 1.0).unwrap(), 3);
        assert!(eca_kernel_size(0, 2.0, 1.0).is_err());
    }

    #[test]
    fn zero_kernel_halves_input() {
        let x = Tensor::from_fn([2, 4, 3, 3], |n, c, h, w| (n + 2 * c) as f64 - (h * w) as f64 * 0.3);
        let p = EcaParams::zeros(4).unwrap();
        let y = eca_forward(&x, &p).unwrap();
        assert_eq!(y, x.scale(0.5));
    }

    #[test]
    fn rejects_long_kernel_and_even_kernel() {
        let x = Tensor::<f64>::zeros([1, 2, 2, 2]);
        let p = EcaParams::with_kernel(vec![0.1; 5]).unwrap();
        assert!(eca_forward(&x, &p).is_err());
        assert!(EcaParams::<f64>::with_kernel(vec![0.0; 4]).is_err());
    }

    #[test]
    fn ratio_constant_within_channel() {
        let x = Tensor::from_fn([1, 3, 2, 2], |_, c, h, w| 1.0 + (c * 4 + h * 2 + w) as f64);
        let p = EcaParams::with_kernel(vec![0.3, -0.2, 0.7]).unwrap();
        let y = eca_forward(&x, &p).unwrap();
        for c in 0..3 {
            let ratios: Vec<f64> = y.plane(0, c).iter().zip(x.plane(0, c)).map(|(a, b)| a / b).collect();
            assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-12));
        }
    }
}
