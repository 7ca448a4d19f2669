//! Encoder-decoder network, objectives, optimizer and training loop.

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod network;
pub mod objective;
pub mod train;

pub use checkpoint::{Checkpoint, EpochRecord};
pub use network::{NetworkParams, Variant, DEFAULT_DIMS};
pub use objective::{batch_gradients, compute_gradients, total_loss, Objective, TupleBatch};
pub use train::{train, train_with_objective, Normalization, TrainConfig, TupleSet};
