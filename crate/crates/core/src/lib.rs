pub mod autodiff;
pub mod backends;
pub mod bench;
pub mod cli;
pub mod error;
pub mod model;
pub mod tasks;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
