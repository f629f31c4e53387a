//! Attention and pooling blocks: ECA, CBAM (CAM then SAM), SPPF, and a demo
//! composition of all of them.
//!
//! Each block exposes a forward pass, the attention weights it produces, and
//! the gradient of its output with respect to its input. Parameter containers
//! also implement [`Differentiable`](crate::tensor::Differentiable) over the
//! block input so they can be passed to [`gradcheck`](crate::tensor::gradcheck).

mod cam;
mod cbam;
mod eca;
mod params_io;
mod pipeline;
mod sam;
mod sppf;

pub use cam::{cam_backward, cam_forward, cam_logits, cam_weights, resolve_reduction, shared_mlp, CamParams, DEFAULT_REDUCTION};
pub use cbam::{cbam_backward, cbam_forward, CbamParams};
pub use eca::{eca_backward, eca_forward, eca_kernel_size, eca_weights, EcaParams, DEFAULT_B_OFFSET, DEFAULT_GAMMA};
pub use params_io::{parse_param_blocks, ParamBlock};
pub use pipeline::{demo_backward, demo_forward, demo_stages, DemoParams, DemoStages};
pub use sam::{sam_backward, sam_forward, sam_map, SamParams, SAM_KERNEL, SAM_PAD};
pub use sppf::{sppf_backward, sppf_forward, sppf_stages, SppfParams, SPPF_PAD, SPPF_POOL};

use rand::Rng;

use crate::tensor::Tensor;
use crate::Scalar;

/// Lower and upper bound of the seeded uniform parameter initialisation.
pub const INIT_RANGE: (f64, f64) = (-0.5, 0.5);

pub(crate) fn init_vec<T: Scalar, R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<T> {
    (0..len).map(|_| T::lit(rng.gen_range(INIT_RANGE.0..INIT_RANGE.1))).collect()
}

pub(crate) fn init_tensor<T: Scalar, R: Rng + ?Sized>(shape: [usize; 4], rng: &mut R) -> Tensor<T> {
    Tensor::random_uniform(shape, INIT_RANGE.0, INIT_RANGE.1, rng)
}

pub(crate) fn single_input<'a, T: Scalar>(inputs: &'a [Tensor<T>], block: &str) -> crate::Result<&'a Tensor<T>> {
    match inputs {
        [x] => Ok(x),
        _ => Err(crate::Error::InvalidShape(format!("{block} takes exactly one input, got {}", inputs.len()))),
    }
}
