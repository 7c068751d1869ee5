//! Differentiable LiDAR and camera simulation with adversarial 3D object
//! optimization against surrogate multi-sensor fusion detectors.

pub mod attack;
pub mod baselines;
pub mod defenses;
pub mod diff;
pub mod error;
pub mod features;
pub mod geometry;
pub mod sensor;
pub mod surrogate;

pub use error::{Error, Result};
