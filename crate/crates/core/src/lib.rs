pub mod bubbles;
pub mod construction;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod mean_field;
pub mod reduction;

pub use error::{Error, Result};
