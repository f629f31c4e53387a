//! Forward kernels. All are pure functions of their inputs.

use crate::error::{shape_err, Error, Result};
use crate::tensor::{Matrix, Shape, Tensor};
use crate::Scalar;

/// Per-channel mean over the spatial extent: `[N,C,H,W] -> [N,C,1,1]`.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.spatial() == 0 {
        return shape_err(format!("global_avg_pool needs a nonempty spatial extent, got {s}"));
    }
    let inv = T::one() / T::from_usize_lossy(s.spatial());
    let mut out = Vec::with_capacity(s.n * s.c);
    for n in 0..s.n {
        for c in 0..s.c {
            let sum: T = x.plane(n, c).iter().copied().sum();
            out.push(sum * inv);
        }
    }
    Tensor::new([s.n, s.c, 1, 1], out)
}

/// Per-channel maximum over the spatial extent: `[N,C,H,W] -> [N,C,1,1]`.
pub fn global_max_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.spatial() == 0 {
        return shape_err(format!("global_max_pool needs a nonempty spatial extent, got {s}"));
    }
    let mut out = Vec::with_capacity(s.n * s.c);
    for n in 0..s.n {
        for c in 0..s.c {
            out.push(x.plane(n, c)[first_argmax(x.plane(n, c))]);
        }
    }
    Tensor::new([s.n, s.c, 1, 1], out)
}

/// Index of the first maximal element. `values` must be nonempty.
pub(crate) fn first_argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// 1-D convolution across the channel axis of a pooled descriptor
/// `[N,C,1,1]`, zero padded at both channel ends.
///
/// `out[n,c] = sum_j kernel[j] * w[n, c + j - (k-1)/2]`.
pub fn conv1d_channels<T: Scalar>(w: &Tensor<T>, kernel: &[T]) -> Result<Tensor<T>> {
    check_odd_kernel(kernel)?;
    let s = w.shape();
    if s.h != 1 || s.w != 1 {
        return shape_err(format!("conv1d_channels expects [N,C,1,1], got {s}"));
    }
    if s.c == 0 {
        return shape_err("conv1d_channels needs at least one channel");
    }
    let half = (kernel.len() - 1) / 2;
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        let src = &w.data()[n * s.c..(n + 1) * s.c];
        let dst = &mut out.data_mut()[n * s.c..(n + 1) * s.c];
        for (c, d) in dst.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (j, &kv) in kernel.iter().enumerate() {
                let idx = c as isize + j as isize - half as isize;
                if idx >= 0 && (idx as usize) < s.c {
                    acc += kv * src[idx as usize];
                }
            }
            *d = acc;
        }
    }
    Ok(out)
}

pub(crate) fn check_odd_kernel<T>(kernel: &[T]) -> Result<()> {
    if kernel.len() % 2 == 0 {
        return Err(Error::InvalidKernel(format!("kernel length must be odd, got {}", kernel.len())));
    }
    Ok(())
}

/// Output extent of a sliding window along one axis.
pub fn window_output_len(len: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if k == 0 || stride == 0 {
        return shape_err(format!("window {k} / stride {stride} must be positive"));
    }
    let padded = len + 2 * pad;
    if k > padded {
        return shape_err(format!("window {k} larger than padded extent {padded}"));
    }
    Ok((padded - k) / stride + 1)
}

/// Stride-1 cross-correlation with zero padding.
///
/// `kernel` is `[Cout, Cin, kh, kw]` and `bias` has `Cout` entries.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, kernel: &Tensor<T>, bias: &[T], pad: usize) -> Result<Tensor<T>> {
    let (xs, ks) = (x.shape(), kernel.shape());
    check_conv2d(xs, ks, bias.len())?;
    let oh = window_output_len(xs.h, ks.h, 1, pad)?;
    let ow = window_output_len(xs.w, ks.w, 1, pad)?;
    let mut out = Tensor::zeros([xs.n, ks.n, oh, ow]);
    for n in 0..xs.n {
        for co in 0..ks.n {
            let plane = out.plane_mut(n, co);
            plane.iter_mut().for_each(|v| *v = bias[co]);
            for ci in 0..xs.c {
                let src = x.plane(n, ci);
                for ky in 0..ks.h {
                    for kx in 0..ks.w {
                        let kv = kernel.at(co, ci, ky, kx);
                        if kv == T::zero() {
                            continue;
                        }
                        for oy in 0..oh {
                            let iy = oy as isize + ky as isize - pad as isize;
                            if iy < 0 || iy as usize >= xs.h {
                                continue;
                            }
                            let row = &src[iy as usize * xs.w..(iy as usize + 1) * xs.w];
                            let orow = &mut plane[oy * ow..(oy + 1) * ow];
                            for (ox, o) in orow.iter_mut().enumerate() {
                                let ix = ox as isize + kx as isize - pad as isize;
                                if ix >= 0 && (ix as usize) < xs.w {
                                    *o += kv * row[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn check_conv2d(xs: Shape, ks: Shape, bias_len: usize) -> Result<()> {
    if ks.c != xs.c {
        return shape_err(format!("conv2d kernel {ks} expects {} input channels, input is {xs}", ks.c));
    }
    if bias_len != ks.n {
        return shape_err(format!("conv2d bias has {bias_len} entries for {} output channels", ks.n));
    }
    Ok(())
}

/// Window maximum. Padding never wins: it behaves as negative infinity.
/// `pad` must be smaller than `k` so every window sees at least one input.
pub fn maxpool2d<T: Scalar>(x: &Tensor<T>, k: usize, stride: usize, pad: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    let (oh, ow) = maxpool_dims(s, k, stride, pad)?;
    let mut out = Tensor::zeros([s.n, s.c, oh, ow]);
    for n in 0..s.n {
        for c in 0..s.c {
            let src = x.plane(n, c);
            let dst = out.plane_mut(n, c);
            for oy in 0..oh {
                for ox in 0..ow {
                    let idx = window_argmax(src, s.h, s.w, oy, ox, k, stride, pad);
                    dst[oy * ow + ox] = src[idx];
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn maxpool_dims(s: Shape, k: usize, stride: usize, pad: usize) -> Result<(usize, usize)> {
    if pad >= k {
        return shape_err(format!("maxpool pad {pad} must be smaller than window {k}"));
    }
    Ok((window_output_len(s.h, k, stride, pad)?, window_output_len(s.w, k, stride, pad)?))
}

/// Flat index (within the plane) of the first maximal in-bounds element of a
/// window, scanning rows then columns.
#[allow(clippy::too_many_arguments)]
pub(crate) fn window_argmax<T: Scalar>(
    src: &[T],
    h: usize,
    w: usize,
    oy: usize,
    ox: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> usize {
    let y0 = (oy * stride) as isize - pad as isize;
    let x0 = (ox * stride) as isize - pad as isize;
    let ys = y0.max(0) as usize..((y0 + k as isize).min(h as isize)) as usize;
    let xs = x0.max(0) as usize..((x0 + k as isize).min(w as isize)) as usize;
    let mut best: Option<usize> = None;
    for y in ys {
        for x in xs.clone() {
            let i = y * w + x;
            match best {
                Some(b) if src[i] <= src[b] => {}
                _ => best = Some(i),
            }
        }
    }
    best.expect("window overlaps the input")
}

/// `weight * x + bias` for a `C'×C` weight.
pub fn dense<T: Scalar>(x: &[T], weight: &Matrix<T>, bias: &[T]) -> Result<Vec<T>> {
    if x.len() != weight.cols() || bias.len() != weight.rows() {
        return shape_err(format!(
            "dense: input {} / bias {} incompatible with {}x{} weight",
            x.len(),
            bias.len(),
            weight.rows(),
            weight.cols()
        ));
    }
    Ok((0..weight.rows())
        .map(|r| weight.row(r).iter().zip(x).map(|(&a, &b)| a * b).sum::<T>() + bias[r])
        .collect())
}

/// Logistic function evaluated without overflow. Results are kept inside the
/// open interval (0, 1) by saturating at the closest representable values.
#[inline]
pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    let s = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    let upper = T::one() - T::epsilon() / T::lit(2.0);
    s.max(T::min_positive_value()).min(upper)
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// Which axes a multiplier tensor spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Broadcast {
    /// `[N,C,1,1]`: one weight per channel.
    Channel,
    /// `[N,1,H,W]`: one weight per pixel.
    Spatial,
}

pub fn broadcast_kind(xs: Shape, ws: Shape) -> Result<Broadcast> {
    if ws.n == xs.n && ws.c == xs.c && ws.h == 1 && ws.w == 1 {
        Ok(Broadcast::Channel)
    } else if ws.n == xs.n && ws.c == 1 && ws.h == xs.h && ws.w == xs.w {
        Ok(Broadcast::Spatial)
    } else {
        shape_err(format!("cannot broadcast {ws} against {xs}"))
    }
}

/// `x` scaled by a per-channel or per-pixel multiplier.
pub fn broadcast_mul<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    let kind = broadcast_kind(s, w.shape())?;
    let mut out = x.clone();
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = out.plane_mut(n, c);
            match kind {
                Broadcast::Channel => {
                    let m = w.at(n, c, 0, 0);
                    plane.iter_mut().for_each(|v| *v *= m);
                }
                Broadcast::Spatial => {
                    plane.iter_mut().zip(w.plane(n, 0)).for_each(|(v, &m)| *v *= m);
                }
            }
        }
    }
    Ok(out)
}

/// Channels of `a` followed by channels of `b`.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.n != sb.n || sa.h != sb.h || sa.w != sb.w {
        return shape_err(format!("concat_channels: {sa} and {sb} differ outside the channel axis"));
    }
    let hw = sa.spatial();
    let mut data = Vec::with_capacity(sa.numel() + sb.numel());
    for n in 0..sa.n {
        data.extend_from_slice(&a.data()[n * sa.c * hw..(n + 1) * sa.c * hw]);
        data.extend_from_slice(&b.data()[n * sb.c * hw..(n + 1) * sb.c * hw]);
    }
    Tensor::new([sa.n, sa.c + sb.c, sa.h, sa.w], data)
}

/// Per-pixel maximum and mean across channels, each `[N,1,H,W]`.
pub fn channel_stats<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = x.shape();
    if s.c == 0 {
        return shape_err("channel_stats needs at least one channel");
    }
    let inv = T::one() / T::from_usize_lossy(s.c);
    let mut max = Tensor::zeros([s.n, 1, s.h, s.w]);
    let mut mean = Tensor::zeros([s.n, 1, s.h, s.w]);
    for n in 0..s.n {
        let mx = max.plane_mut(n, 0);
        mx.copy_from_slice(x.plane(n, 0));
        for c in 1..s.c {
            for (m, &v) in mx.iter_mut().zip(x.plane(n, c)) {
                if v > *m {
                    *m = v;
                }
            }
        }
        let mn = mean.plane_mut(n, 0);
        for c in 0..s.c {
            for (m, &v) in mn.iter_mut().zip(x.plane(n, c)) {
                *m += v;
            }
        }
        mn.iter_mut().for_each(|m| *m *= inv);
    }
    Ok((max, mean))
}
