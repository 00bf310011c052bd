pub mod certify;
pub mod error;
pub mod model;
pub mod numlin;
pub mod polyhedra;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
