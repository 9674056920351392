//! Multimodal sentiment fusion through cross-modal Transformer translation.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod layers;
pub mod model;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
