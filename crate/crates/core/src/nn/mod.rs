//! Numerical core: dense tensors, MLPs, segment max-pooling, softmax
//! cross-entropy and Adam. Each op carries its own hand-written backward.

mod adam;
mod loss;
mod mlp;
mod pool;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use loss::{cross_entropy, softmax_rows, LossError};
pub use mlp::{Linear, LinearGrads, Mlp, MlpCache, MlpGrads};
pub use pool::{segment_max_pool, segment_max_pool_backward, PoolError, Pooled};
pub use tensor::{ShapeError, Tensor2};

#[allow(unused_imports)]
pub(crate) use tensor::dot;
