use rand::Rng;

use crate::attention::{init_vec, single_input};
use crate::error::{shape_err, Result};
use crate::tensor::backward::{self as bw, TiePolicy};
use crate::tensor::{ops, Differentiable, Matrix, Tensor};
use crate::Scalar;

pub const DEFAULT_REDUCTION: usize = 16;

/// Clamps `reduction` to `1..=channels` and checks it divides `channels`.
pub fn resolve_reduction(channels: usize, reduction: usize) -> Result<usize> {
    if channels == 0 {
        return shape_err("channel attention needs at least one channel");
    }
    let r = reduction.clamp(1, channels);
    if channels % r != 0 {
        return shape_err(format!("{channels} channels not divisible by reduction {r}"));
    }
    Ok(r)
}

/// Channel attention: a two-layer MLP shared by the average- and max-pooled
/// descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct CamParams<T> {
    reduction: usize,
    w1: Matrix<T>,
    b1: Vec<T>,
    w2: Matrix<T>,
    b2: Vec<T>,
}

impl<T: Scalar> CamParams<T> {
    pub fn new(reduction: usize, w1: Matrix<T>, b1: Vec<T>, w2: Matrix<T>, b2: Vec<T>) -> Result<Self> {
        let channels = w1.cols();
        let r = resolve_reduction(channels, reduction)?;
        let hidden = channels / r;
        if w1.rows() != hidden || b1.len() != hidden || w2.rows() != channels || w2.cols() != hidden || b2.len() != channels {
            return shape_err(format!(
                "CAM with {channels} channels and reduction {r} needs W1 {hidden}x{channels}, b1 {hidden}, W2 {channels}x{hidden}, b2 {channels}"
            ));
        }
        Ok(Self { reduction: r, w1, b1, w2, b2 })
    }

    pub fn zeros(channels: usize, reduction: usize) -> Result<Self> {
        let r = resolve_reduction(channels, reduction)?;
        let hidden = channels / r;
        Self::new(r, Matrix::zeros(hidden, channels), vec![T::zero(); hidden], Matrix::zeros(channels, hidden), vec![T::zero(); channels])
    }

    pub fn random<R: Rng + ?Sized>(channels: usize, reduction: usize, rng: &mut R) -> Result<Self> {
        let r = resolve_reduction(channels, reduction)?;
        let hidden = channels / r;
        let w1 = Matrix::new(hidden, channels, init_vec(hidden * channels, rng))?;
        let b1 = init_vec(hidden, rng);
        let w2 = Matrix::new(channels, hidden, init_vec(channels * hidden, rng))?;
        let b2 = init_vec(channels, rng);
        Self::new(r, w1, b1, w2, b2)
    }

    pub fn channels(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn reduction(&self) -> usize {
        self.reduction
    }

    pub fn w1(&self) -> &Matrix<T> {
        &self.w1
    }

    pub fn b1(&self) -> &[T] {
        &self.b1
    }

    pub fn w2(&self) -> &Matrix<T> {
        &self.w2
    }

    pub fn b2(&self) -> &[T] {
        &self.b2
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape().c != self.channels() {
            return shape_err(format!("CAM built for {} channels, input is {}", self.channels(), x.shape()));
        }
        Ok(())
    }
}

/// `W2 relu(W1 v + b1) + b2`. Returns the hidden pre-activation as well.
fn mlp<T: Scalar>(p: &CamParams<T>, v: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let pre = ops::dense(v, &p.w1, &p.b1)?;
    let act: Vec<T> = pre.iter().map(|&h| h.max(T::zero())).collect();
    let out = ops::dense(&act, &p.w2, &p.b2)?;
    Ok((pre, out))
}

fn mlp_backward<T: Scalar>(p: &CamParams<T>, pre: &[T], g_out: &[T]) -> Result<Vec<T>> {
    let act: Vec<T> = pre.iter().map(|&h| h.max(T::zero())).collect();
    let g_act = bw::dense_backward(&act, &p.w2, g_out)?.input;
    let g_pre: Vec<T> = g_act.iter().zip(pre).map(|(&g, &h)| if h > T::zero() { g } else { T::zero() }).collect();
    Ok(bw::dense_backward(&vec![T::zero(); p.channels()], &p.w1, &g_pre)?.input)
}

/// The shared MLP applied to one pooled descriptor of length `C`.
pub fn shared_mlp<T: Scalar>(p: &CamParams<T>, v: &[T]) -> Result<Vec<T>> {
    Ok(mlp(p, v)?.1)
}

struct Branches<T> {
    avg: Tensor<T>,
    max: Tensor<T>,
    pre_avg: Vec<Vec<T>>,
    pre_max: Vec<Vec<T>>,
    logits: Tensor<T>,
}

fn branches<T: Scalar>(x: &Tensor<T>, p: &CamParams<T>) -> Result<Branches<T>> {
    p.check_input(x)?;
    let s = x.shape();
    let avg = ops::global_avg_pool(x)?;
    let max = ops::global_max_pool(x)?;
    let mut logits = Tensor::zeros([s.n, s.c, 1, 1]);
    let (mut pre_avg, mut pre_max) = (Vec::with_capacity(s.n), Vec::with_capacity(s.n));
    for n in 0..s.n {
        let (pa, oa) = mlp(p, &avg.data()[n * s.c..(n + 1) * s.c])?;
        let (pm, om) = mlp(p, &max.data()[n * s.c..(n + 1) * s.c])?;
        for (c, (a, m)) in oa.iter().zip(&om).enumerate() {
            logits[[n, c, 0, 0]] = *a + *m;
        }
        pre_avg.push(pa);
        pre_max.push(pm);
    }
    Ok(Branches { avg, max, pre_avg, pre_max, logits })
}

/// Pre-sigmoid channel logits `MLP(avgpool(x)) + MLP(maxpool(x))`.
pub fn cam_logits<T: Scalar>(x: &Tensor<T>, p: &CamParams<T>) -> Result<Tensor<T>> {
    Ok(branches(x, p)?.logits)
}

/// Channel weights in (0, 1), shape `[N,C,1,1]`.
pub fn cam_weights<T: Scalar>(x: &Tensor<T>, p: &CamParams<T>) -> Result<Tensor<T>> {
    Ok(ops::sigmoid(&cam_logits(x, p)?))
}

pub fn cam_forward<T: Scalar>(x: &Tensor<T>, p: &CamParams<T>) -> Result<Tensor<T>> {
    ops::broadcast_mul(x, &cam_weights(x, p)?)
}

/// Gradient of [`cam_forward`] with respect to `x`.
pub fn cam_backward<T: Scalar>(x: &Tensor<T>, p: &CamParams<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    let b = branches(x, p)?;
    let w = ops::sigmoid(&b.logits);
    let (mut gx, gw) = bw::broadcast_mul_backward(x, &w, g)?;
    let gz = bw::sigmoid_backward(&w, &gw)?;
    let mut g_avg = Tensor::zeros(b.avg.shape());
    let mut g_max = Tensor::zeros(b.max.shape());
    for n in 0..s.n {
        let gzn = &gz.data()[n * s.c..(n + 1) * s.c];
        let ga = mlp_backward(p, &b.pre_avg[n], gzn)?;
        let gm = mlp_backward(p, &b.pre_max[n], gzn)?;
        g_avg.data_mut()[n * s.c..(n + 1) * s.c].copy_from_slice(&ga);
        g_max.data_mut()[n * s.c..(n + 1) * s.c].copy_from_slice(&gm);
    }
    gx = gx.add(&bw::global_avg_pool_backward(s, &g_avg)?)?;
    gx.add(&bw::global_max_pool_backward(x, &g_max, TiePolicy::FirstIndex)?)
}

impl<T: Scalar> Differentiable<T> for CamParams<T> {
    fn name(&self) -> String {
        "cam".into()
    }

    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        Ok(vec![cam_forward(single_input(inputs, "cam")?, self)?])
    }

    fn vjp(&self, inputs: &[Tensor<T>], upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let g = single_input(upstream, "cam upstream")?;
        Ok(vec![cam_backward(single_input(inputs, "cam")?, self, g)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reduction_clamped_and_checked() {
        assert_eq!(resolve_reduction(8, 16).unwrap(), 8);
        assert_eq!(resolve_reduction(64, 16).unwrap(), 16);
        assert!(resolve_reduction(24, 16).is_err());
        assert!(resolve_reduction(0, 16).is_err());
    }

    #[test]
    fn zero_params_halve_input() {
        let x = Tensor::from_fn([1, 4, 3, 2], |_, c, h, w| c as f64 - h as f64 * 0.5 + w as f64);
        let p = CamParams::zeros(4, 2).unwrap();
        assert_eq!(cam_forward(&x, &p).unwrap(), x.scale(0.5));
    }

    #[test]
    fn constant_input_doubles_logit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = CamParams::<f64>::random(4, 2, &mut rng).unwrap();
        let x = Tensor::full([1, 4, 3, 3], 0.7);
        let logits = cam_logits(&x, &p).unwrap();
        let single = shared_mlp(&p, &[0.7; 4]).unwrap();
        for (l, s) in logits.data().iter().zip(&single) {
            assert!((l - 2.0 * s).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_channel_count() {
        let p = CamParams::<f64>::zeros(4, 2).unwrap();
        assert!(cam_forward(&Tensor::zeros([1, 3, 2, 2]), &p).is_err());
        assert!(CamParams::new(2, Matrix::<f64>::zeros(2, 4), vec![0.0; 2], Matrix::zeros(4, 3), vec![0.0; 4]).is_err());
    }
}
