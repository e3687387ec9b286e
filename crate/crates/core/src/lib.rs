//! Adaptive independent Metropolis-Hastings sampling with mixture-of-normals proposals.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arwm;
pub mod data_io;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod khm;
pub mod linalg;
pub mod mixture;
pub mod sampler;
pub mod targets;

pub use error::{Error, Result};
pub use mixture::{GaussianComponent, MixtureOfNormals};
pub use targets::TargetModel;
