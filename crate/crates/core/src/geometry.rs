//! Axis-aligned center-format boxes, IoU, the CIoU regression loss and
//! anchor-free decoding of per-cell predictions.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::ops::sigmoid_scalar;
use crate::tensor::{Differentiable, Tensor};
use crate::Scalar;

/// Box given by its center and size in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox<T> {
    cx: T,
    cy: T,
    w: T,
    h: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(cx: T, cy: T, w: T, h: T) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite box ({cx}, {cy}, {w}, {h})")));
        }
        if !(w > T::zero() && h > T::zero()) {
            return Err(Error::InvalidBox(format!("box size must be positive, got {w}x{h}")));
        }
        Ok(Self { cx, cy, w, h })
    }

    pub fn from_corners(x1: T, y1: T, x2: T, y2: T) -> Result<Self> {
        let two = T::lit(2.0);
        Self::new((x1 + x2) / two, (y1 + y2) / two, x2 - x1, y2 - y1)
    }

    pub fn cx(&self) -> T {
        self.cx
    }

    pub fn cy(&self) -> T {
        self.cy
    }

    pub fn w(&self) -> T {
        self.w
    }

    pub fn h(&self) -> T {
        self.h
    }

    /// `(x1, y1, x2, y2)`.
    pub fn corners(&self) -> (T, T, T, T) {
        let (hw, hh) = (self.w / T::lit(2.0), self.h / T::lit(2.0));
        (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn translated(&self, dx: T, dy: T) -> Result<Self> {
        Self::new(self.cx + dx, self.cy + dy, self.w, self.h)
    }

    /// Scales every coordinate about the origin.
    pub fn scaled(&self, s: T) -> Result<Self> {
        Self::new(self.cx * s, self.cy * s, self.w * s, self.h * s)
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.cx, self.cy, self.w, self.h]
    }
}

fn overlap<T: Scalar>(a1: T, a2: T, b1: T, b2: T) -> T {
    (a2.min(b2) - a1.max(b1)).max(T::zero())
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let inter = overlap(ax1, ax2, bx1, bx2) * overlap(ay1, ay2, by1, by2);
    // areas from the same corners as the overlap, so iou(a, a) is exactly 1
    let union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
    (inter / union).max(T::zero()).min(T::one())
}

/// The individual CIoU terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiouTerms<T> {
    pub iou: T,
    /// Squared distance between the centers.
    pub rho2: T,
    /// Squared diagonal of the smallest enclosing box.
    pub c2: T,
    /// Aspect-ratio consistency `(4/pi^2) (atan(wg/hg) - atan(w/h))^2`.
    pub v: T,
    /// Trade-off weight `v / ((1 - iou) + v)`, 0 when `v = 0`.
    pub alpha: T,
}

impl<T: Scalar> CiouTerms<T> {
    pub fn loss(&self) -> T {
        self.loss_with_alpha(self.alpha)
    }

    pub fn loss_with_alpha(&self, alpha: T) -> T {
        T::one() - self.iou + self.rho2 / self.c2 + alpha * self.v
    }
}

fn aspect_gap<T: Scalar>(pred: &BBox<T>, gt: &BBox<T>) -> T {
    (gt.w / gt.h).atan() - (pred.w / pred.h).atan()
}

fn v_scale<T: Scalar>() -> T {
    T::lit(4.0) / (T::PI() * T::PI())
}

pub fn ciou_terms<T: Scalar>(pred: &BBox<T>, gt: &BBox<T>) -> CiouTerms<T> {
    let (px1, py1, px2, py2) = pred.corners();
    let (gx1, gy1, gx2, gy2) = gt.corners();
    let cw = px2.max(gx2) - px1.min(gx1);
    let ch = py2.max(gy2) - py1.min(gy1);
    let rho2 = (pred.cx - gt.cx).powi(2) + (pred.cy - gt.cy).powi(2);
    let v = v_scale::<T>() * aspect_gap(pred, gt).powi(2);
    let iou = iou(pred, gt);
    let denom = (T::one() - iou) + v;
    let alpha = if v > T::zero() { v / denom } else { T::zero() };
    CiouTerms { iou, rho2, c2: cw * cw + ch * ch, v, alpha }
}

/// Complete-IoU loss `1 - IoU + rho^2/c^2 + alpha v`.
pub fn ciou_loss<T: Scalar>(pred: &BBox<T>, gt: &BBox<T>) -> Result<T> {
    BBox::new(pred.cx, pred.cy, pred.w, pred.h)?;
    BBox::new(gt.cx, gt.cy, gt.w, gt.h)?;
    Ok(ciou_terms(pred, gt).loss().max(T::zero()))
}

/// Gradient of the CIoU loss with respect to `(cx, cy, w, h)` of the
/// prediction, with `alpha` held constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiouGrad<T> {
    pub grad: [T; 4],
    /// An edge of the prediction coincides with an edge of the ground truth
    /// (or the boxes touch without overlapping). The loss has a kink there;
    /// `grad` is the one-sided derivative that keeps the ground-truth edge
    /// as the active `min`/`max` argument.
    pub at_kink: bool,
}

/// Derivatives along one axis: `(d overlap/dc, d overlap/dsize, d span/dc, d span/dsize)`.
fn axis_derivs<T: Scalar>(p1: T, p2: T, g1: T, g2: T, kink: &mut bool) -> (T, T, T, T) {
    let half = T::lit(0.5);
    let zero = T::zero();
    if p2 == g2 || p1 == g1 {
        *kink = true;
    }
    let len = p2.min(g2) - p1.max(g1);
    if len == zero {
        *kink = true;
    }
    let (mut d_ov_c, mut d_ov_s) = (zero, zero);
    if len > zero {
        if p2 < g2 {
            d_ov_c += T::one();
            d_ov_s += half;
        }
        if p1 > g1 {
            d_ov_c -= T::one();
            d_ov_s += half;
        }
    }
    let (mut d_sp_c, mut d_sp_s) = (zero, zero);
    if p2 > g2 {
        d_sp_c += T::one();
        d_sp_s += half;
    }
    if p1 < g1 {
        d_sp_c -= T::one();
        d_sp_s += half;
    }
    (d_ov_c, d_ov_s, d_sp_c, d_sp_s)
}

pub fn ciou_grad<T: Scalar>(pred: &BBox<T>, gt: &BBox<T>) -> Result<CiouGrad<T>> {
    ciou_loss(pred, gt)?;
    let terms = ciou_terms(pred, gt);
    let (px1, py1, px2, py2) = pred.corners();
    let (gx1, gy1, gx2, gy2) = gt.corners();
    let mut kink = false;
    let (dix_c, dix_s, dcx_c, dcx_s) = axis_derivs(px1, px2, gx1, gx2, &mut kink);
    let (diy_c, diy_s, dcy_c, dcy_s) = axis_derivs(py1, py2, gy1, gy2, &mut kink);

    let iw = overlap(px1, px2, gx1, gx2);
    let ih = overlap(py1, py2, gy1, gy2);
    let inter = iw * ih;
    let union = pred.area() + gt.area() - inter;
    // d inter / d (cx, cy, w, h)
    let d_inter = [dix_c * ih, diy_c * iw, dix_s * ih, diy_s * iw];
    let d_area = [T::zero(), T::zero(), pred.h, pred.w];
    let two = T::lit(2.0);

    let cw = px2.max(gx2) - px1.min(gx1);
    let ch = py2.max(gy2) - py1.min(gy1);
    let d_c2 = [two * cw * dcx_c, two * ch * dcy_c, two * cw * dcx_s, two * ch * dcy_s];
    let d_rho2 = [two * (pred.cx - gt.cx), two * (pred.cy - gt.cy), T::zero(), T::zero()];

    let gap = aspect_gap(pred, gt);
    let r2 = pred.w * pred.w + pred.h * pred.h;
    let dv_common = two * v_scale::<T>() * gap;
    let d_v = [T::zero(), T::zero(), -dv_common * pred.h / r2, dv_common * pred.w / r2];

    let mut grad = [T::zero(); 4];
    for i in 0..4 {
        let d_union = d_area[i] - d_inter[i];
        let d_iou = (d_inter[i] * union - inter * d_union) / (union * union);
        let d_dist = (d_rho2[i] * terms.c2 - terms.rho2 * d_c2[i]) / (terms.c2 * terms.c2);
        grad[i] = -d_iou + d_dist + terms.alpha * d_v[i];
    }
    Ok(CiouGrad { grad, at_kink: kink })
}

/// CIoU with `alpha` frozen at a chosen value, as a differentiable function of
/// the prediction packed as a `[1,1,1,4]` tensor `(cx, cy, w, h)`. Finite
/// differences of this function agree with [`ciou_grad`] evaluated where
/// `alpha` was taken.
#[derive(Debug, Clone, Copy)]
pub struct FrozenAlphaCiou<T> {
    pub gt: BBox<T>,
    pub alpha: T,
}

impl<T: Scalar> FrozenAlphaCiou<T> {
    /// Freezes `alpha` at its value for `(pred, gt)`.
    pub fn at(pred: &BBox<T>, gt: BBox<T>) -> Self {
        Self { gt, alpha: ciou_terms(pred, &gt).alpha }
    }
}

fn box_of<T: Scalar>(inputs: &[Tensor<T>]) -> Result<BBox<T>> {
    match inputs {
        [t] if t.len() == 4 => BBox::new(t.data()[0], t.data()[1], t.data()[2], t.data()[3]),
        _ => shape_err("CIoU takes a single [1,1,1,4] box tensor"),
    }
}

impl<T: Scalar> Differentiable<T> for FrozenAlphaCiou<T> {
    fn name(&self) -> String {
        "ciou".into()
    }

    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let pred = box_of(inputs)?;
        Ok(vec![Tensor::from_vec(vec![ciou_terms(&pred, &self.gt).loss_with_alpha(self.alpha)])])
    }

    fn vjp(&self, inputs: &[Tensor<T>], upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let pred = box_of(inputs)?;
        let g = match upstream {
            [u] if u.len() == 1 => u.data()[0],
            _ => return shape_err("CIoU upstream must be a single scalar"),
        };
        // recompute with the frozen alpha rather than the one at `pred`
        let base = ciou_grad(&pred, &self.gt)?;
        let own_alpha = ciou_terms(&pred, &self.gt).alpha;
        let gap = aspect_gap(&pred, &self.gt);
        let r2 = pred.w * pred.w + pred.h * pred.h;
        let dv_common = T::lit(2.0) * v_scale::<T>() * gap;
        let d_v = [T::zero(), T::zero(), -dv_common * pred.h / r2, dv_common * pred.w / r2];
        let grad: Vec<T> = (0..4).map(|i| (base.grad[i] + (self.alpha - own_alpha) * d_v[i]) * g).collect();
        Ok(vec![Tensor::new(inputs[0].shape(), grad)?])
    }
}

/// Raw per-cell regression output of an anchor-free head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCellPred<T> {
    pub gx: usize,
    pub gy: usize,
    /// Pixels per grid cell.
    pub stride: T,
    /// `(dx, dy, dw, dh)`.
    pub raw: [T; 4],
}

/// Center offset through a sigmoid inside the cell, size through `exp`:
/// `cx = (gx + sigmoid(dx)) * stride`, `w = exp(dw) * stride`.
pub fn decode_anchor_free<T: Scalar>(p: &GridCellPred<T>) -> Result<BBox<T>> {
    if !(p.stride > T::zero()) || !p.stride.is_finite() {
        return Err(Error::InvalidPrediction(format!("stride must be positive, got {}", p.stride)));
    }
    if p.raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPrediction(format!("non-finite raw values {:?}", p.raw)));
    }
    let [dx, dy, dw, dh] = p.raw;
    let cx = (T::from_usize_lossy(p.gx) + sigmoid_scalar(dx)) * p.stride;
    let cy = (T::from_usize_lossy(p.gy) + sigmoid_scalar(dy)) * p.stride;
    BBox::new(cx, cy, dw.exp() * p.stride, dh.exp() * p.stride)
        .map_err(|e| Error::InvalidPrediction(format!("decoded box invalid: {e}")))
}
