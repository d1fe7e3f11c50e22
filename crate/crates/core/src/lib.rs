pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod scenarios;
pub mod tendon;

pub use error::{Error, Result};
