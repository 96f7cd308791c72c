//! Tensor-based receivers for bistatic integrated sensing and communication.

pub mod comm;
pub mod error;
pub mod harness;
pub mod sensing;
pub mod signal;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{CMat, Tensor3};
