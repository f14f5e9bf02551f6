//! Threshold selection for two-model cascades with statistical guarantees.

pub mod cascade;
pub mod data;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod sampling;
pub mod seed;

pub use error::{Error, Result};
