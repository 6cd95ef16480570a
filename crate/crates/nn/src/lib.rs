//! Small CPU tensor engine: NCHW tensors, differentiable layers with exact
//! backward passes, Adam, layer graphs, a model zoo and a weights format.

pub mod adam;
pub mod error;
pub mod graph;
pub mod model;
pub mod ops;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod weights;
pub mod zoo;

pub use adam::{AdamConfig, AdamState};
pub use error::NnError;
pub use graph::{GraphBuilder, LayerKind, LayerSpec, ModelGraph, NodeId};
pub use model::{Gradients, LayerGrad, LayerParams, Model, Tape};
pub use ops::{Mode, Padding};
pub use rng::{he_init, Rng};
pub use scalar::Scalar;
pub use tensor::{Shape4, Tensor4};
pub use weights::WeightsFile;
pub use zoo::{Arch, ArchConfig};
