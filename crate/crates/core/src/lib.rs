//! BRepNet: topological message passing for face segmentation of
//! boundary-representation solids.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root pick `f64` unless the name says otherwise.

pub mod data;
pub mod features;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod nn;
mod scalar;
pub mod topology;
pub mod train;
pub mod walks;

pub use scalar::Scalar;

pub use data::{DataError, SegmentLabel, SolidRecord};
pub use features::Standardizer;
pub use model::{parameter_count, ArchitectureConfig, ModelError, ModelInput};
pub use topology::{validate, SolidTopology, TopologyError, ValidationReport};
pub use walks::{kernel_preset, parse_walk, KernelPreset, KernelSpec, Walk};

pub type Tensor = nn::Tensor2<f64>;
pub type TensorF32 = nn::Tensor2<f32>;
pub type Model = model::BRepNetModel<f64>;
pub type ModelF32 = model::BRepNetModel<f32>;
pub type Batch = data::Batch<f64>;
pub type BatchF32 = data::Batch<f32>;
