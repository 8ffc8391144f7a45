//! Minimal differentiable dense-array engine.

pub mod conv;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod optim;
pub mod tensor;

pub use gradcheck::{finite_diff_gradient, finite_diff_param, relative_error};
pub use graph::{Graph, NodeId, ParamId, ParamStore, Parameter, SpatialAxis};
pub use optim::{clip_grad_norm, Adam, AdamConfig};
pub use tensor::{depth_to_space, space_to_depth, Real, Tensor};
