//! Optimization: Adam, task objectives, the training loop and checkpoints.
mod adam;
mod checkpoint;
mod objective;
mod trainer;
#[cfg(test)]
mod tests;

pub use adam::{Adam, DEFAULT_LEARNING_RATE};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use objective::{render_image, LossTerms, Objective, SdfEvaluation};
pub use trainer::{TrainConfig, TrainHooks, TrainReport, Trainer};
