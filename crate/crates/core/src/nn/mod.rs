//! Small dense reverse-mode kernel: tape, gradient check, Adam, parameter store.

mod adam;
mod gradcheck;
mod params;
mod real;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use params::{seeded_rng, Init, ParamStore, ParamVars};
pub use real::Real;
pub use tape::{Gradients, Shape, Tape, Tensor, Var, LAYER_NORM_EPS};
