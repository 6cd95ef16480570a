//! Layer kernels. Each forward function has a matching backward that
//! returns exact analytic gradients.

mod batchnorm;
mod conv;
mod elementwise;
mod loss;
mod pool;
mod transpose_conv;

pub use batchnorm::{
    batchnorm_backward, batchnorm_forward, batchnorm_infer_backward, BatchNormCache, BatchNormState, Mode,
    BN_EPSILON, BN_MOMENTUM,
};
pub use conv::{conv2d_backward, conv2d_forward, conv_output_size, ConvGeometry, Padding};
pub use elementwise::{add, concat_channels, relu_backward, relu_forward, split_channels, subtract};
pub use loss::mse_loss;
pub use pool::{maxpool_backward, maxpool_forward, pool_output_size, PoolCache};
pub use transpose_conv::{transpose_conv_backward, transpose_conv_forward, transpose_full_size};
