pub mod error;
pub mod fidelity;
pub mod fit;
pub mod integrate;
pub mod model;
pub mod protocols;
pub mod qspace;
mod quad;
pub mod estimate;

pub use error::{Error, ErrorClass, Result};
