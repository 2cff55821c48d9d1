//! Layer primitives with forward and backward passes.

mod activation;
mod conv;
mod loss;
mod pool;
mod transposed;

pub use activation::{argmax_channels, relu, relu_backward, softmax_pixelwise};
pub use conv::{
    dilated_conv2d_backward, dilated_conv2d_backward_with, dilated_conv2d_forward,
    dilated_conv2d_forward_with, upsample_kernel, ConvBackend, ConvGrads, ConvSpec, Padding,
};
pub use loss::cross_entropy_loss;
pub use pool::{maxpool2d, maxpool2d_backward, ArgmaxIndices, PoolSpec};
pub use transposed::{
    bilinear_crop, bilinear_kernel, bilinear_kernel_size, bilinear_transposed_kernel,
    bilinear_upsample, bilinear_upsample_backward, crop_spatial, crop_spatial_backward,
    transposed_conv2d, transposed_conv2d_backward, TransposedGrads,
};
