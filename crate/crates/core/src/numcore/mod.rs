//! Differentiable primitives: tensors, the tape, parameters, Adam, and
//! gradient checking.

mod adam;
pub mod gradcheck;
mod params;
mod rng;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use params::{Param, ParamStore};
pub use rng::Rng;
pub use tape::{Elementwise, Gradients, Graph, Tape, Trainable, Var};
pub use tensor::{sigmoid, Tensor2};
