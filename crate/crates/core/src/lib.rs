//! Gaussian stochastic linearization of open quantum systems.

pub mod algebra;
pub mod cli;
pub mod duffing;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod moments;
pub mod quadfit;
pub mod sampling;
pub mod selftest;
pub mod tensor;

pub use error::{Error, Result};
