//! The cross-modal translation fusion model, its losses and checkpoints.

mod checkpoint;
mod config;
mod fusion;
mod loss;
mod transmodality;

pub use checkpoint::CHECKPOINT_FORMAT;
pub use config::ModelConfig;
pub(crate) use config::parse_value;
pub use fusion::{extract_context, ContextExtractor, FusionCell, FusionCellOutput};
pub use loss::{classification_loss, joint_loss, predict, translation_loss, Direction, JointLossWeights};
pub use transmodality::{ForwardOutput, TransModality, VideoLoss};
