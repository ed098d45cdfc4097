//! File formats, dataset handling, the training loop and the command line
//! harness around `dan-core`.

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod pgm;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
