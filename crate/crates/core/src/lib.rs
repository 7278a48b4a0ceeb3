//! Explore-then-commit bandits with generalized linear rewards over tensor
//! contexts, estimated by penalized maximum likelihood under structured
//! (low-rank, slice-sparse, entry-sparse, fiber-sparse) regularizers.

pub mod bandit;
pub mod error;
pub mod estimator;
pub mod glm;
pub mod linalg;
pub mod regularizers;
pub mod tensor;

pub use error::{Error, Result};
pub use glm::{Design, GlmFamily, GlmKind};
pub use regularizers::{ProxOptions, RegularizerKind, RegularizerSpec};
pub use tensor::DenseTensor;
