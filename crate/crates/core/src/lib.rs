//! Standard and dilated fully convolutional networks for CPU semantic
//! segmentation, trained from scratch with hand-written backpropagation.

pub mod data;
pub mod error;
pub mod eval;
pub mod labels;
pub mod net;
pub mod ops;
pub mod tensor;
pub mod train;

pub use error::{Error, ImageError, ModelError, Result};
pub use labels::{Class, LabelMap, CLASS_NAMES, NUM_CLASSES};
pub use net::{Network, Variant};
pub use tensor::Tensor;
