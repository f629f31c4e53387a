//! Vector-Jacobian products for the kernels in [`super::ops`].
//!
//! Each function takes the forward inputs and the upstream gradient (same
//! shape as the forward output) and returns the gradient for every
//! differentiable input.

use crate::error::{shape_err, Error, Result};
use crate::tensor::ops::{self, broadcast_kind, check_conv2d, first_argmax, maxpool_dims, window_argmax, Broadcast};
use crate::tensor::{Matrix, Shape, Tensor};
use crate::Scalar;

/// Subgradient rule for max-based kernels when several elements share the
/// maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Route the gradient to the lowest-index maximal element.
    #[default]
    FirstIndex,
    /// Fail with [`Error::NotDifferentiable`].
    Reject,
}

fn check_upstream<T: Scalar>(g: &Tensor<T>, expected: Shape, op: &str) -> Result<()> {
    if g.shape() != expected {
        return shape_err(format!("{op}: upstream {} does not match output {expected}", g.shape()));
    }
    Ok(())
}

fn has_tie<T: Scalar>(values: impl Iterator<Item = (usize, T)>, best: usize, max: T) -> bool {
    values.into_iter().any(|(i, v)| i != best && v == max)
}

pub fn global_avg_pool_backward<T: Scalar>(input: Shape, g: &Tensor<T>) -> Result<Tensor<T>> {
    check_upstream(g, Shape::new(input.n, input.c, 1, 1), "global_avg_pool")?;
    if input.spatial() == 0 {
        return shape_err("global_avg_pool over empty spatial extent");
    }
    let inv = T::one() / T::from_usize_lossy(input.spatial());
    let mut gx = Tensor::zeros(input);
    for n in 0..input.n {
        for c in 0..input.c {
            let v = g.at(n, c, 0, 0) * inv;
            gx.plane_mut(n, c).iter_mut().for_each(|e| *e = v);
        }
    }
    Ok(gx)
}

pub fn global_max_pool_backward<T: Scalar>(x: &Tensor<T>, g: &Tensor<T>, ties: TiePolicy) -> Result<Tensor<T>> {
    let s = x.shape();
    check_upstream(g, Shape::new(s.n, s.c, 1, 1), "global_max_pool")?;
    if s.spatial() == 0 {
        return shape_err("global_max_pool over empty spatial extent");
    }
    let mut gx = Tensor::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = x.plane(n, c);
            let best = first_argmax(plane);
            if ties == TiePolicy::Reject && has_tie(plane.iter().copied().enumerate(), best, plane[best]) {
                return Err(Error::NotDifferentiable("global_max_pool".into()));
            }
            gx.plane_mut(n, c)[best] = g.at(n, c, 0, 0);
        }
    }
    Ok(gx)
}

/// Returns `(d/dw, d/dkernel)`.
pub fn conv1d_channels_backward<T: Scalar>(w: &Tensor<T>, kernel: &[T], g: &Tensor<T>) -> Result<(Tensor<T>, Vec<T>)> {
    ops::check_odd_kernel(kernel)?;
    let s = w.shape();
    check_upstream(g, s, "conv1d_channels")?;
    let half = (kernel.len() - 1) as isize / 2;
    let mut gw = Tensor::zeros(s);
    let mut gk = vec![T::zero(); kernel.len()];
    for n in 0..s.n {
        let src = &w.data()[n * s.c..(n + 1) * s.c];
        let up = &g.data()[n * s.c..(n + 1) * s.c];
        let dst = &mut gw.data_mut()[n * s.c..(n + 1) * s.c];
        for (c, &gv) in up.iter().enumerate() {
            for (j, (&kv, gkj)) in kernel.iter().zip(gk.iter_mut()).enumerate() {
                let idx = c as isize + j as isize - half;
                if idx >= 0 && (idx as usize) < s.c {
                    dst[idx as usize] += kv * gv;
                    *gkj += src[idx as usize] * gv;
                }
            }
        }
    }
    Ok((gw, gk))
}

/// Gradients of a stride-1 convolution.
pub struct Conv2dGrads<T> {
    pub input: Tensor<T>,
    pub kernel: Tensor<T>,
    pub bias: Vec<T>,
}

pub fn conv2d_backward<T: Scalar>(x: &Tensor<T>, kernel: &Tensor<T>, pad: usize, g: &Tensor<T>) -> Result<Conv2dGrads<T>> {
    let (xs, ks) = (x.shape(), kernel.shape());
    check_conv2d(xs, ks, ks.n)?;
    let oh = ops::window_output_len(xs.h, ks.h, 1, pad)?;
    let ow = ops::window_output_len(xs.w, ks.w, 1, pad)?;
    check_upstream(g, Shape::new(xs.n, ks.n, oh, ow), "conv2d")?;
    let mut gx = Tensor::zeros(xs);
    let mut gk = Tensor::zeros(ks);
    let mut gb = vec![T::zero(); ks.n];
    for n in 0..xs.n {
        for co in 0..ks.n {
            let up = g.plane(n, co);
            gb[co] += up.iter().copied().sum::<T>();
            for ci in 0..xs.c {
                for ky in 0..ks.h {
                    for kx in 0..ks.w {
                        let kv = kernel.at(co, ci, ky, kx);
                        let mut acc = T::zero();
                        for oy in 0..oh {
                            let iy = oy as isize + ky as isize - pad as isize;
                            if iy < 0 || iy as usize >= xs.h {
                                continue;
                            }
                            let iy = iy as usize;
                            for ox in 0..ow {
                                let ix = ox as isize + kx as isize - pad as isize;
                                if ix < 0 || ix as usize >= xs.w {
                                    continue;
                                }
                                let ix = ix as usize;
                                let gv = up[oy * ow + ox];
                                acc += gv * x.at(n, ci, iy, ix);
                                gx[[n, ci, iy, ix]] += gv * kv;
                            }
                        }
                        gk[[co, ci, ky, kx]] += acc;
                    }
                }
            }
        }
    }
    Ok(Conv2dGrads { input: gx, kernel: gk, bias: gb })
}

pub fn maxpool2d_backward<T: Scalar>(
    x: &Tensor<T>,
    k: usize,
    stride: usize,
    pad: usize,
    g: &Tensor<T>,
    ties: TiePolicy,
) -> Result<Tensor<T>> {
    let s = x.shape();
    let (oh, ow) = maxpool_dims(s, k, stride, pad)?;
    check_upstream(g, Shape::new(s.n, s.c, oh, ow), "maxpool2d")?;
    let mut gx = Tensor::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let src = x.plane(n, c);
            let up = g.plane(n, c);
            let mut acc = vec![T::zero(); s.spatial()];
            for oy in 0..oh {
                for ox in 0..ow {
                    let best = window_argmax(src, s.h, s.w, oy, ox, k, stride, pad);
                    if ties == TiePolicy::Reject {
                        let y0 = (oy * stride) as isize - pad as isize;
                        let x0 = (ox * stride) as isize - pad as isize;
                        let window = (y0.max(0) as usize..((y0 + k as isize).min(s.h as isize)) as usize)
                            .flat_map(|y| {
                                (x0.max(0) as usize..((x0 + k as isize).min(s.w as isize)) as usize)
                                    .map(move |xx| y * s.w + xx)
                            })
                            .map(|i| (i, src[i]));
                        if has_tie(window, best, src[best]) {
                            return Err(Error::NotDifferentiable("maxpool2d".into()));
                        }
                    }
                    acc[best] += up[oy * ow + ox];
                }
            }
            gx.plane_mut(n, c).copy_from_slice(&acc);
        }
    }
    Ok(gx)
}

/// Gradients of `weight * x + bias`.
pub struct DenseGrads<T> {
    pub input: Vec<T>,
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

pub fn dense_backward<T: Scalar>(x: &[T], weight: &Matrix<T>, g: &[T]) -> Result<DenseGrads<T>> {
    if x.len() != weight.cols() || g.len() != weight.rows() {
        return shape_err("dense: gradient dimensions disagree with the weight");
    }
    let mut gx = vec![T::zero(); x.len()];
    let mut gw = Matrix::zeros(weight.rows(), weight.cols());
    for (r, &gr) in g.iter().enumerate() {
        for (c, &xc) in x.iter().enumerate() {
            gx[c] += weight.at(r, c) * gr;
            gw.data_mut()[r * x.len() + c] = gr * xc;
        }
    }
    Ok(DenseGrads { input: gx, weight: gw, bias: g.to_vec() })
}

/// Gradient of the logistic function expressed through its output `y`.
pub fn sigmoid_backward<T: Scalar>(y: &Tensor<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    y.zip_map(g, |s, gv| gv * s * (T::one() - s))
}

pub fn relu_backward<T: Scalar>(x: &Tensor<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    x.zip_map(g, |v, gv| if v > T::zero() { gv } else { T::zero() })
}

/// Returns `(d/dx, d/dw)` where `w` is the broadcast multiplier.
pub fn broadcast_mul_backward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, g: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = x.shape();
    check_upstream(g, s, "broadcast_mul")?;
    let kind = broadcast_kind(s, w.shape())?;
    let gx = ops::broadcast_mul(g, w)?;
    let mut gw = Tensor::zeros(w.shape());
    for n in 0..s.n {
        for c in 0..s.c {
            let xp = x.plane(n, c);
            let gp = g.plane(n, c);
            match kind {
                Broadcast::Channel => {
                    gw[[n, c, 0, 0]] += xp.iter().zip(gp).map(|(&a, &b)| a * b).sum::<T>();
                }
                Broadcast::Spatial => {
                    gw.plane_mut(n, 0).iter_mut().zip(xp.iter().zip(gp)).for_each(|(o, (&a, &b))| *o += a * b);
                }
            }
        }
    }
    Ok((gx, gw))
}

/// Splits the upstream gradient back into the two concatenated inputs.
pub fn concat_channels_backward<T: Scalar>(a_channels: usize, g: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let c = g.shape().c;
    if a_channels > c {
        return shape_err("concat_channels: split point beyond channel count");
    }
    Ok((g.slice_channels(0, a_channels)?, g.slice_channels(a_channels, c - a_channels)?))
}

pub fn channel_stats_backward<T: Scalar>(
    x: &Tensor<T>,
    g_max: &Tensor<T>,
    g_mean: &Tensor<T>,
    ties: TiePolicy,
) -> Result<Tensor<T>> {
    let s = x.shape();
    let out = Shape::new(s.n, 1, s.h, s.w);
    check_upstream(g_max, out, "channel_stats (max)")?;
    check_upstream(g_mean, out, "channel_stats (mean)")?;
    if s.c == 0 {
        return shape_err("channel_stats needs at least one channel");
    }
    let inv = T::one() / T::from_usize_lossy(s.c);
    let mut gx = Tensor::zeros(s);
    let mut column = vec![T::zero(); s.c];
    for n in 0..s.n {
        for p in 0..s.spatial() {
            for (c, v) in column.iter_mut().enumerate() {
                *v = x.plane(n, c)[p];
            }
            let best = first_argmax(&column);
            if ties == TiePolicy::Reject && has_tie(column.iter().copied().enumerate(), best, column[best]) {
                return Err(Error::NotDifferentiable("channel_stats".into()));
            }
            let gm = g_mean.plane(n, 0)[p] * inv;
            for c in 0..s.c {
                gx.plane_mut(n, c)[p] += gm;
            }
            gx.plane_mut(n, best)[p] += g_max.plane(n, 0)[p];
        }
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ops;

    #[test]
    fn sigmoid_slope_at_zero() {
        let y = ops::sigmoid(&Tensor::<f64>::zeros([1, 1, 1, 1]));
        let g = sigmoid_backward(&y, &Tensor::full([1, 1, 1, 1], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.25]);
    }

    #[test]
    fn broadcast_input_grad_is_multiplier() {
        let x = Tensor::from_fn([1, 2, 2, 2], |_, c, h, w| (c + h + w) as f64);
        let w = Tensor::new([1, 2, 1, 1], vec![0.3, -2.0]).unwrap();
        let ones = Tensor::full([1, 2, 2, 2], 1.0);
        let (gx, gw) = broadcast_mul_backward(&x, &w, &ones).unwrap();
        assert!(gx.plane(0, 0).iter().all(|&v| v == 0.3));
        assert!(gx.plane(0, 1).iter().all(|&v| v == -2.0));
        assert_eq!(gw.data(), &[x.plane(0, 0).iter().sum::<f64>(), x.plane(0, 1).iter().sum::<f64>()]);
    }

    #[test]
    fn max_ties_follow_policy() {
        let x = Tensor::new([1, 1, 1, 3], vec![2.0, 5.0, 5.0]).unwrap();
        let g = Tensor::full([1, 1, 1, 1], 1.0);
        let gx = global_max_pool_backward(&x, &g, TiePolicy::FirstIndex).unwrap();
        assert_eq!(gx.data(), &[0.0, 1.0, 0.0]);
        assert!(matches!(global_max_pool_backward(&x, &g, TiePolicy::Reject), Err(Error::NotDifferentiable(_))));

        let up = Tensor::full([1, 1, 1, 3], 1.0);
        assert!(matches!(maxpool2d_backward(&x, 3, 1, 1, &up, TiePolicy::Reject), Err(Error::NotDifferentiable(_))));
        let x3 = Tensor::new([1, 2, 1, 1], vec![4.0, 4.0]).unwrap();
        let one = Tensor::full([1, 1, 1, 1], 1.0);
        let zero = Tensor::zeros([1, 1, 1, 1]);
        let gx = channel_stats_backward(&x3, &one, &zero, TiePolicy::FirstIndex).unwrap();
        assert_eq!(gx.data(), &[1.0, 0.0]);
        assert!(channel_stats_backward(&x3, &one, &zero, TiePolicy::Reject).is_err());
    }

    #[test]
    fn upstream_shape_checked() {
        let x = Tensor::<f64>::zeros([1, 2, 3, 3]);
        let bad = Tensor::<f64>::zeros([1, 2, 3, 1]);
        assert!(global_avg_pool_backward(x.shape(), &bad).is_err());
        assert!(maxpool2d_backward(&x, 3, 1, 1, &Tensor::zeros([1, 2, 2, 2]), TiePolicy::FirstIndex).is_err());
    }
}
