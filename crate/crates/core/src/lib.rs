//! RF modulation classification from first principles: labeled I/Q
//! synthesis, the convolutional-transform and STFT front-ends, a small
//! differentiable tensor engine, the CONV-5 and residual image networks, and
//! per-SNR evaluation.

pub mod autodiff;
mod codec;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod models;
pub mod ops;
pub mod signal;
pub mod tensor;
pub mod train;
pub mod transforms;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
