//! Double-precision tensors, a reverse-mode tape, optimizers and checkpoints.

mod gradcheck;
pub mod ops;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::grad_check;
pub use optim::{Optimizer, OptimizerConfig};
pub use params::Params;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
