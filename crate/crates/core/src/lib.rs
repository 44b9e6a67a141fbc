//! Numerical geometry of the Hopf fibration of S3: invariant frames, the
//! projectable/balanced splitting of vector fields, the aligned exponential
//! and the energy-minimizing balanced slice.

pub mod aligned;
pub mod config;
pub mod diffeo;
pub mod error;
pub mod fields;
pub mod holonomy;
pub mod io;
pub mod quat;
pub mod spectral;
pub mod slice;
pub mod sphere;
pub mod synth;
pub mod verify;

pub use error::{GeomError, Result};
