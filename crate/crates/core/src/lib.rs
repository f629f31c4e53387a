//! Numerical core for pavement crack inspection.
//!
//! The crate groups five areas:
//!
//! - [`tensor`]: a small NCHW tensor with hand-written forward and
//!   vector-Jacobian kernels, plus a finite-difference gradient checker.
//! - [`attention`]: ECA, CBAM (channel then spatial attention) and SPPF blocks
//!   built from those kernels.
//! - [`geometry`]: center-format boxes, IoU, the CIoU regression loss and
//!   anchor-free decoding.
//! - [`mask`]: binary crack masks, exact Euclidean distance transform,
//!   thinning and per-component width reports.
//! - [`metrics`]: confusion counts, instance matching, PR curves and
//!   average precision.
//!
//! [`io`] holds the file formats (PGM masks, polygon labels, JSON-lines
//! predictions, reports) and the deterministic dataset split. [`verify`]
//! runs the seeded gradient checks over every kernel and block.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the double-precision instantiation used by the gradient checks.

pub mod attention;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod scalar;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision tensor.
pub type Tensor64 = tensor::Tensor<f64>;
/// Single-precision tensor.
pub type Tensor32 = tensor::Tensor<f32>;
/// Double-precision dense matrix.
pub type Matrix64 = tensor::Matrix<f64>;
/// Double-precision center-format box.
pub type BBox64 = geometry::BBox<f64>;
/// Single-precision center-format box.
pub type BBox32 = geometry::BBox<f32>;
pub type EcaParams64 = attention::EcaParams<f64>;
pub type CamParams64 = attention::CamParams<f64>;
pub type SamParams64 = attention::SamParams<f64>;
pub type SppfParams64 = attention::SppfParams<f64>;
