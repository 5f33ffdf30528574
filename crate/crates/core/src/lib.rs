#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod functionals;
pub mod integrator;
pub mod model;
pub mod spectral;
pub mod sweep;
pub mod theory;

pub use error::{Error, Result};
