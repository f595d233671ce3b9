//! Dense arrays, reverse-mode gradients, Adam and gradient verification.

mod adam;
mod gradcheck;
pub mod rng;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport, ParamCheck};
pub use tape::{sigmoid, Gradients, Tape, Var, BCE_EPS};
pub use tensor::{ParamId, ParamStore, Tensor};
