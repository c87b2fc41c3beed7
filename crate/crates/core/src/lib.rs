pub mod classify;
pub mod datasets;
pub mod error;
pub mod filterbank;
pub mod mesh;
pub mod pipeline;
pub mod scattering;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
