//! Minimal dense-array math for the tap-localization network: 2D/3D
//! convolution, resampling layers, the focal heatmap loss, Adam, and a
//! finite-difference gradient checker.
//!
//! Gradients are hand-written per layer. Every backward pass is verified
//! against [`grad_check`] in the test suite.

pub mod conv;
pub mod error;
pub mod gradcheck;
pub mod loss;
pub mod ops;
pub mod optim;
pub mod tensor;

pub use conv::{
    conv2d, conv2d_backward, conv2d_forward, conv3d, conv3d_backward, conv3d_forward, Conv2dSpec,
    Conv3dSpec, ConvForward, ConvGrads,
};
pub use error::{NnError, Result};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use loss::{focal_loss, focal_loss_logits, FocalLoss, FocalParams, PROB_EPS};
pub use optim::AdamState;
pub use tensor::{gemm, Real, Tensor};
