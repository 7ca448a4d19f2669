pub mod error;
pub mod exec;
pub mod features;
pub mod eval;
pub mod model;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Exec;
