use rand::Rng;

use crate::attention::{init_tensor, init_vec, single_input};
use crate::error::{shape_err, Result};
use crate::tensor::backward::{self as bw, TiePolicy};
use crate::tensor::{ops, Differentiable, Tensor};
use crate::Scalar;

pub const SPPF_POOL: usize = 5;
pub const SPPF_PAD: usize = 2;

/// Fast spatial pyramid pooling: 1×1 reduce, three chained 5×5 stride-1 max
/// pools, concatenation of all four stages, 1×1 expand.
#[derive(Debug, Clone, PartialEq)]
pub struct SppfParams<T> {
    reduce_kernel: Tensor<T>,
    reduce_bias: Vec<T>,
    expand_kernel: Tensor<T>,
    expand_bias: Vec<T>,
}

impl<T: Scalar> SppfParams<T> {
    pub fn new(reduce_kernel: Tensor<T>, reduce_bias: Vec<T>, expand_kernel: Tensor<T>, expand_bias: Vec<T>) -> Result<Self> {
        let (r, e) = (reduce_kernel.shape(), expand_kernel.shape());
        if r.h != 1 || r.w != 1 || e.h != 1 || e.w != 1 {
            return shape_err("SPPF convolutions must be 1x1");
        }
        if reduce_bias.len() != r.n || expand_bias.len() != e.n {
            return shape_err("SPPF bias length does not match output channels");
        }
        if e.c != 4 * r.n {
            return shape_err(format!("SPPF expand conv takes {} channels, need 4 * {} = {}", e.c, r.n, 4 * r.n));
        }
        Ok(Self { reduce_kernel, reduce_bias, expand_kernel, expand_bias })
    }

    pub fn zeros(c_in: usize, c_mid: usize, c_out: usize) -> Self {
        Self {
            reduce_kernel: Tensor::zeros([c_mid, c_in, 1, 1]),
            reduce_bias: vec![T::zero(); c_mid],
            expand_kernel: Tensor::zeros([c_out, 4 * c_mid, 1, 1]),
            expand_bias: vec![T::zero(); c_out],
        }
    }

    /// Identity reduce conv (`c_mid = c_in`) with a zero expand conv. Useful
    /// for inspecting the pooled stages directly.
    pub fn identity_reduce(c_in: usize, c_out: usize) -> Self {
        let mut p = Self::zeros(c_in, c_in, c_out);
        for c in 0..c_in {
            p.reduce_kernel[[c, c, 0, 0]] = T::one();
        }
        p
    }

    pub fn random<R: Rng + ?Sized>(c_in: usize, c_mid: usize, c_out: usize, rng: &mut R) -> Self {
        let reduce_kernel = init_tensor([c_mid, c_in, 1, 1], rng);
        let reduce_bias = init_vec(c_mid, rng);
        let expand_kernel = init_tensor([c_out, 4 * c_mid, 1, 1], rng);
        let expand_bias = init_vec(c_out, rng);
        Self { reduce_kernel, reduce_bias, expand_kernel, expand_bias }
    }

    pub fn c_in(&self) -> usize {
        self.reduce_kernel.shape().c
    }

    pub fn c_mid(&self) -> usize {
        self.reduce_kernel.shape().n
    }

    pub fn c_out(&self) -> usize {
        self.expand_kernel.shape().n
    }

    pub fn reduce_kernel(&self) -> &Tensor<T> {
        &self.reduce_kernel
    }

    pub fn reduce_bias(&self) -> &[T] {
        &self.reduce_bias
    }

    pub fn expand_kernel(&self) -> &Tensor<T> {
        &self.expand_kernel
    }

    pub fn expand_bias(&self) -> &[T] {
        &self.expand_bias
    }
}

/// The reduced input and its three successive pools `[y0, y1, y2, y3]`.
pub fn sppf_stages<T: Scalar>(x: &Tensor<T>, p: &SppfParams<T>) -> Result<[Tensor<T>; 4]> {
    if x.shape().c != p.c_in() {
        return shape_err(format!("SPPF built for {} channels, input is {}", p.c_in(), x.shape()));
    }
    let y0 = ops::conv2d(x, &p.reduce_kernel, &p.reduce_bias, 0)?;
    let y1 = ops::maxpool2d(&y0, SPPF_POOL, 1, SPPF_PAD)?;
    let y2 = ops::maxpool2d(&y1, SPPF_POOL, 1, SPPF_PAD)?;
    let y3 = ops::maxpool2d(&y2, SPPF_POOL, 1, SPPF_PAD)?;
    Ok([y0, y1, y2, y3])
}

fn concat_stages<T: Scalar>(stages: &[Tensor<T>; 4]) -> Result<Tensor<T>> {
    let a = ops::concat_channels(&stages[0], &stages[1])?;
    let b = ops::concat_channels(&a, &stages[2])?;
    ops::concat_channels(&b, &stages[3])
}

pub fn sppf_forward<T: Scalar>(x: &Tensor<T>, p: &SppfParams<T>) -> Result<Tensor<T>> {
    let cat = concat_stages(&sppf_stages(x, p)?)?;
    ops::conv2d(&cat, &p.expand_kernel, &p.expand_bias, 0)
}

/// Gradient of [`sppf_forward`] with respect to `x`.
pub fn sppf_backward<T: Scalar>(x: &Tensor<T>, p: &SppfParams<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    let stages = sppf_stages(x, p)?;
    let cat = concat_stages(&stages)?;
    let g_cat = bw::conv2d_backward(&cat, &p.expand_kernel, 0, g)?.input;
    let cm = p.c_mid();
    let mut g_stage: Vec<Tensor<T>> = (0..4).map(|i| g_cat.slice_channels(i * cm, cm)).collect::<Result<_>>()?;
    // walk the pool chain backwards, accumulating into the earlier stage
    for i in (1..4).rev() {
        let back = bw::maxpool2d_backward(&stages[i - 1], SPPF_POOL, 1, SPPF_PAD, &g_stage[i], TiePolicy::FirstIndex)?;
        g_stage[i - 1] = g_stage[i - 1].add(&back)?;
    }
    Ok(bw::conv2d_backward(x, &p.reduce_kernel, 0, &g_stage[0])?.input)
}

impl<T: Scalar> Differentiable<T> for SppfParams<T> {
    fn name(&self) -> String {
        "sppf".into()
    }

    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        Ok(vec![sppf_forward(single_input(inputs, "sppf")?, self)?])
    }

    fn vjp(&self, inputs: &[Tensor<T>], upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let g = single_input(upstream, "sppf upstream")?;
        Ok(vec![sppf_backward(single_input(inputs, "sppf")?, self, g)?])
    }
}
