//! Central finite-difference verification of vector-Jacobian products.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::tensor::{Differentiable, Tensor};
use crate::Scalar;

/// Denominator floor for the relative error, so all-zero gradients compare
/// as an absolute error instead of dividing by zero.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub op: String,
    pub max_rel_error: f64,
    /// One entry per input: `max|analytic - numeric| / max(|analytic|inf, |numeric|inf, floor)`.
    pub per_input: Vec<f64>,
    pub pass: bool,
    /// Set when the forward or backward pass itself failed.
    pub error: Option<String>,
}

impl GradCheckReport {
    fn failed(op: String, msg: String) -> Self {
        Self { op, max_rel_error: f64::INFINITY, per_input: Vec::new(), pass: false, error: Some(msg) }
    }
}

/// Checks `f.vjp` against central differences of the scalar projection
/// `L(inputs) = sum_k <r_k, f(inputs)_k>`, where each `r_k` is drawn uniformly
/// from `[-1, 1]` by a ChaCha8 generator seeded with `seed`.
///
/// Every element of every input is perturbed by `±eps`. The check passes when
/// the largest per-input relative error is at most `tol`.
pub fn gradcheck<T, D>(f: &D, inputs: &[Tensor<T>], eps: f64, tol: f64, seed: u64) -> GradCheckReport
where
    T: Scalar,
    D: Differentiable<T> + ?Sized,
{
    let name = f.name();
    let outputs = match f.forward(inputs) {
        Ok(o) => o,
        Err(e) => return GradCheckReport::failed(name, e.to_string()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let projection: Vec<Tensor<T>> =
        outputs.iter().map(|o| Tensor::random_uniform(o.shape(), -1.0, 1.0, &mut rng)).collect();
    let analytic = match f.vjp(inputs, &projection) {
        Ok(g) => g,
        Err(e) => return GradCheckReport::failed(name, e.to_string()),
    };
    if analytic.len() != inputs.len() {
        return GradCheckReport::failed(name, format!("vjp returned {} gradients for {} inputs", analytic.len(), inputs.len()));
    }

    let objective = |xs: &[Tensor<T>]| -> Option<f64> {
        let outs = f.forward(xs).ok()?;
        let mut acc = 0.0;
        for (o, r) in outs.iter().zip(&projection) {
            acc += o.dot(r).ok()?.as_f64();
        }
        Some(acc)
    };

    let step = T::lit(eps);
    let mut work: Vec<Tensor<T>> = inputs.to_vec();
    let mut per_input = Vec::with_capacity(inputs.len());
    for (i, grad) in analytic.iter().enumerate() {
        if grad.shape() != inputs[i].shape() {
            return GradCheckReport::failed(name, format!("gradient {i} has shape {}, input has {}", grad.shape(), inputs[i].shape()));
        }
        let (mut diff, mut scale_a, mut scale_n) = (0.0f64, 0.0f64, 0.0f64);
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            work[i].data_mut()[j] = orig + step;
            let plus = objective(&work);
            work[i].data_mut()[j] = orig - step;
            let minus = objective(&work);
            work[i].data_mut()[j] = orig;
            let (Some(plus), Some(minus)) = (plus, minus) else {
                return GradCheckReport::failed(name, format!("forward failed while perturbing input {i}"));
            };
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[j].as_f64();
            diff = diff.max((a - numeric).abs());
            scale_a = scale_a.max(a.abs());
            scale_n = scale_n.max(numeric.abs());
        }
        per_input.push(diff / scale_a.max(scale_n).max(REL_ERROR_FLOOR));
    }
    let max_rel_error = per_input.iter().copied().fold(0.0, f64::max);
    GradCheckReport { op: name, max_rel_error, per_input, pass: max_rel_error <= tol, error: None }
}
