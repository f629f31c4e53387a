//! Seeded finite-difference verification of every kernel and block.
//!
//! Each target draws random cases from a ChaCha8 stream. In max-based
//! targets every pair of values a max compares is separated by at least
//! `TIE_MARGIN_STEPS * eps`, relu pre-activations stay that far from zero,
//! and CIoU pairs keep parallel edges that far apart. Cases that violate the
//! margin are redrawn before any gradient is computed, so no finite-difference
//! stencil straddles a kink.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attention::{cam_forward, eca_forward, sam_forward, CamParams, CbamParams, DemoParams, EcaParams, SamParams, SppfParams};
use crate::geometry::{BBox, FrozenAlphaCiou};
use crate::tensor::{gradcheck, ops, Differentiable, Matrix, Op, Tensor};

/// Minimum separation, in units of `eps`, between values a max or relu could
/// switch on.
pub const TIE_MARGIN_STEPS: f64 = 10.0;

const MAX_REDRAWS: usize = 1000;

/// Every target in the order the suite runs them.
pub const TARGETS: &[&str] = &[
    "global_avg_pool",
    "global_max_pool",
    "conv1d_channels",
    "conv2d",
    "maxpool2d",
    "dense",
    "sigmoid",
    "relu",
    "broadcast_mul",
    "concat_channels",
    "channel_stats",
    "eca",
    "cam",
    "sam",
    "cbam",
    "sppf",
    "demo_pipeline",
    "ciou",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub cases: usize,
    pub eps: f64,
    pub tol: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 0, cases: 100, eps: 1e-5, tol: 1e-4 }
    }
}

/// Outcome of one target over all its cases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetReport {
    pub target: String,
    pub cases: usize,
    pub failures: usize,
    pub worst_rel_error: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

type Case = (Box<dyn Differentiable<f64>>, Vec<Tensor<f64>>);

/// Values `-1 + (i + 0.5) * d` for `i < n`, shuffled, with `d = 2 / n`.
/// Any two differ by at least `d`.
fn spaced(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let d = 2.0 / n as f64;
    let mut v: Vec<f64> = (0..n).map(|i| -1.0 + (i as f64 + 0.5) * d).collect();
    v.shuffle(rng);
    Tensor::new(shape, v).expect("shape matches")
}

fn uniform(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::random_uniform(shape, -1.0, 1.0, rng)
}

fn min_gap(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Smallest gap inside any `(n, c)` plane.
fn plane_gap(t: &Tensor<f64>) -> f64 {
    let s = t.shape();
    (0..s.n).flat_map(|n| (0..s.c).map(move |c| (n, c))).map(|(n, c)| min_gap(t.plane(n, c).iter().copied())).fold(f64::INFINITY, f64::min)
}

/// Smallest gap across channels at any pixel.
fn channel_gap(t: &Tensor<f64>) -> f64 {
    let s = t.shape();
    let mut g = f64::INFINITY;
    for n in 0..s.n {
        for h in 0..s.h {
            for w in 0..s.w {
                g = g.min(min_gap((0..s.c).map(|c| t.at(n, c, h, w))));
            }
        }
    }
    g
}

/// Smallest |pre-activation| of the CAM hidden layer over both branches.
fn cam_hidden_margin(x: &Tensor<f64>, p: &CamParams<f64>) -> f64 {
    let s = x.shape();
    let avg = ops::global_avg_pool(x).expect("valid input");
    let max = ops::global_max_pool(x).expect("valid input");
    let mut m = f64::INFINITY;
    for n in 0..s.n {
        for pooled in [&avg, &max] {
            let v = &pooled.data()[n * s.c..(n + 1) * s.c];
            let pre = ops::dense(v, p.w1(), p.b1()).expect("matching dims");
            m = pre.iter().fold(m, |m, h| m.min(h.abs()));
        }
    }
    m
}

fn cam_clear(x: &Tensor<f64>, p: &CamParams<f64>, margin: f64) -> bool {
    plane_gap(x) > margin && cam_hidden_margin(x, p) > margin
}

fn sppf_clear(x: &Tensor<f64>, p: &SppfParams<f64>, margin: f64) -> bool {
    let y0 = ops::conv2d(x, p.reduce_kernel(), p.reduce_bias(), 0).expect("valid input");
    plane_gap(&y0) > margin
}

fn draw(target: &str, margin: f64, rng: &mut ChaCha8Rng) -> Option<Case> {
    let case: Case = match target {
        "global_avg_pool" => (Box::new(Op::GlobalAvgPool), vec![uniform([2, 3, 4, 5], rng)]),
        "global_max_pool" => (Box::new(Op::GlobalMaxPool), vec![spaced([2, 3, 4, 5], rng)]),
        "conv1d_channels" => {
            let k = [1, 3, 5][rng.gen_range(0..3)];
            (Box::new(Op::Conv1dChannels), vec![uniform([2, 7, 1, 1], rng), uniform([1, 1, 1, k], rng)])
        }
        "conv2d" => {
            let pad = rng.gen_range(0..=2);
            let inputs = vec![uniform([1, 2, 5, 6], rng), uniform([3, 2, 3, 3], rng), uniform([1, 1, 1, 3], rng)];
            (Box::new(Op::Conv2d { pad }), inputs)
        }
        "maxpool2d" => {
            let (k, stride) = [(2, 2), (3, 1), (3, 2), (5, 1)][rng.gen_range(0..4)];
            let pad = rng.gen_range(0..=k / 2);
            (Box::new(Op::MaxPool2d { k, stride, pad }), vec![spaced([1, 2, 6, 7], rng)])
        }
        "dense" => {
            let w = Matrix::random_uniform(4, 6, -1.0, 1.0, rng).to_tensor();
            (Box::new(Op::Dense), vec![uniform([1, 1, 1, 6], rng), w, uniform([1, 1, 1, 4], rng)])
        }
        "sigmoid" => (Box::new(Op::Sigmoid), vec![Tensor::random_uniform([1, 3, 4, 4], -4.0, 4.0, rng)]),
        "relu" => {
            let x = uniform([1, 3, 4, 4], rng).map(|v| if v < 0.0 { v - 0.05 } else { v + 0.05 });
            (Box::new(Op::Relu), vec![x])
        }
        "broadcast_mul" => {
            let w = if rng.gen_bool(0.5) { uniform([2, 3, 1, 1], rng) } else { uniform([2, 1, 4, 4], rng) };
            (Box::new(Op::BroadcastMul), vec![uniform([2, 3, 4, 4], rng), w])
        }
        "concat_channels" => (Box::new(Op::ConcatChannels), vec![uniform([1, 2, 3, 3], rng), uniform([1, 3, 3, 3], rng)]),
        "channel_stats" => (Box::new(Op::ChannelStats), vec![spaced([2, 4, 3, 3], rng)]),
        "eca" => {
            let p = EcaParams::random(8, rng).ok()?;
            (Box::new(p), vec![uniform([2, 8, 4, 4], rng)])
        }
        "cam" => {
            let p = CamParams::random(8, 2, rng).ok()?;
            let x = spaced([2, 8, 4, 4], rng);
            if !cam_clear(&x, &p, margin) {
                return None;
            }
            (Box::new(p), vec![x])
        }
        "sam" => (Box::new(SamParams::random(rng)), vec![spaced([1, 4, 6, 6], rng)]),
        "cbam" => {
            let p = CbamParams::random(6, 2, rng).ok()?;
            let x = spaced([1, 6, 5, 5], rng);
            let after_cam = cam_forward(&x, &p.cam).ok()?;
            if !cam_clear(&x, &p.cam, margin) || channel_gap(&after_cam) <= margin {
                return None;
            }
            (Box::new(p), vec![x])
        }
        "sppf" => {
            let p = SppfParams::random(3, 2, 4, rng);
            let x = uniform([1, 3, 6, 6], rng);
            if !sppf_clear(&x, &p, margin) {
                return None;
            }
            (Box::new(p), vec![x])
        }
        "demo_pipeline" => {
            let p = DemoParams::random(2, 4, 3, rng.gen()).ok()?;
            let x = Tensor::random_uniform([1, 2, 4, 4], -2.0, 2.0, rng);
            let stem = ops::conv2d(&x, &p.stem_kernel, &p.stem_bias, 1).ok()?;
            let eca = eca_forward(&stem, &p.eca).ok()?;
            let cam = cam_forward(&eca, &p.cbam.cam).ok()?;
            let cbam = sam_forward(&cam, &p.cbam.sam).ok()?;
            if !cam_clear(&eca, &p.cbam.cam, margin) || channel_gap(&cam) <= margin || !sppf_clear(&cbam, &p.sppf, margin) {
                return None;
            }
            (Box::new(p), vec![x])
        }
        "ciou" => {
            let gt = BBox::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0)).ok()?;
            let pred = BBox::new(
                gt.cx() + rng.gen_range(-2.0..2.0),
                gt.cy() + rng.gen_range(-2.0..2.0),
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.5..4.0),
            )
            .ok()?;
            let (px1, py1, px2, py2) = pred.corners();
            let (gx1, gy1, gx2, gy2) = gt.corners();
            if min_gap([px1, px2, gx1, gx2]) <= margin || min_gap([py1, py2, gy1, gy2]) <= margin {
                return None;
            }
            let f = FrozenAlphaCiou::at(&pred, gt);
            (Box::new(f), vec![Tensor::from_vec(pred.to_array().to_vec())])
        }
        _ => return None,
    };
    Some(case)
}

/// Runs `cfg.cases` random cases of one target. Unknown targets report a
/// failure.
pub fn run_target(target: &str, cfg: &SuiteConfig) -> TargetReport {
    let mut report =
        TargetReport { target: target.to_string(), cases: 0, failures: 0, worst_rel_error: 0.0, pass: true, first_failure: None };
    let fail = |r: &mut TargetReport, msg: String| {
        r.failures += 1;
        r.pass = false;
        r.first_failure.get_or_insert(msg);
    };
    if !TARGETS.contains(&target) {
        fail(&mut report, format!("unknown target `{target}`"));
        return report;
    }
    let margin = TIE_MARGIN_STEPS * cfg.eps;
    let salt = TARGETS.iter().position(|t| *t == target).unwrap() as u64;
    for case in 0..cfg.cases {
        let case_seed = cfg.seed ^ (salt << 48) ^ (case as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
        let Some((f, inputs)) = (0..MAX_REDRAWS).find_map(|_| draw(target, margin, &mut rng)) else {
            fail(&mut report, format!("case {case}: no tie-free input after {MAX_REDRAWS} draws"));
            continue;
        };
        let r = gradcheck(f.as_ref(), &inputs, cfg.eps, cfg.tol, rng.gen());
        report.cases += 1;
        report.worst_rel_error = report.worst_rel_error.max(r.max_rel_error);
        if !r.pass {
            let why = r.error.unwrap_or_else(|| format!("rel error {:.3e}", r.max_rel_error));
            fail(&mut report, format!("case {case}: {why}"));
        }
    }
    report
}

/// Every target in [`TARGETS`] order.
pub fn gradient_suite(cfg: &SuiteConfig) -> Vec<TargetReport> {
    TARGETS.iter().map(|t| run_target(t, cfg)).collect()
}
