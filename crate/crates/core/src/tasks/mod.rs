//! Training objectives and evaluation metrics for the three benchmark fits.
mod image;
mod metrics;
mod pinn;
mod sdf;

pub use image::*;
pub use metrics::*;
pub use pinn::*;
pub use sdf::*;
