//! Forward and backward kernels for every layer the models use.
//!
//! These are plain functions of their inputs; [`crate::autodiff`] wires
//! them into a tape.

mod conv;
mod dense;
mod elementwise;
mod loss;
mod pool;

pub use conv::{
    conv1d_backward, conv1d_forward, conv2d_backward, conv2d_forward, conv2d_geom,
    conv2d_geom_backward, ConvGeometry,
};
pub use dense::{dense, dense_backward};
pub use elementwise::{
    add, global_avg_pool, global_avg_pool_backward, relu, relu_backward, swap_inner_axes,
};
pub use loss::{softmax_cross_entropy, softmax_cross_entropy_backward, CrossEntropy};
pub use pool::{maxpool2d, maxpool2d_backward, Pooled};
