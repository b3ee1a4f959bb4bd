//! Online packing of d-dimensional hypercubes into unit bins.
//!
//! The crate has two halves. The packing side ([`small`], [`large`],
//! [`engine`]) is an online algorithm that sends tiny items to a recursive
//! sub-bin allocator and larger ones to a harmonic-style packer with red/blue
//! colouring and explicit geometry. The analysis side ([`analysis`]) evaluates
//! weighting functions over feasible item sets and certifies upper bounds on
//! the algorithm's asymptotic competitive ratio.

pub mod analysis;
pub mod bench;
pub mod bins;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod large;
pub mod params;
pub mod rational;
pub mod small;

pub use error::{Error, Result};
pub use rational::Rational;
