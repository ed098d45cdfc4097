//! Core of the deformation-aware interpolation network.
//!
//! Everything here is pure computation over in-memory values and builds
//! with `alloc` only:
//!
//! - [`tensor`]: dense row-major arrays and the kernels behind them
//! - [`tape`]: reverse-mode differentiation over those kernels
//! - [`attention`]: interlaced long/short-range block attention and the
//!   two-level decomposition used by the deformation-aware layer
//! - [`model`]: siamese residual dense extractor, warp heads and blendnet
//! - [`losses`], [`metrics`], [`image`], [`optim`], [`train`]
//!
//! File formats, the CLI and benchmarks live in the `dan` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attention;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tape::{Gradients, ParamId, ParamStore, Parameter, Tape, Var};
pub use tensor::Tensor;
