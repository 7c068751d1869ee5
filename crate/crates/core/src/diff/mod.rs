//! Reverse-mode adjoint substrate.

mod check;
mod scalar;
mod tape;
pub mod vec3;

pub use check::{eval_plain, finite_diff_check, gradient, scalar_fn, GradientCheck};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var};
pub use vec3::V3;
