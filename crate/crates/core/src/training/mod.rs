//! Optimization, evaluation metrics, significance testing and the
//! backward-translation ablation.

mod ablation;
mod adam;
mod baseline;
mod config;
mod metrics;
mod train;

pub use ablation::{run_ablation, AblationReport, AblationRun, VariantSummary, WITHOUT_BACKWARD, WITH_BACKWARD};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use baseline::{best_unimodal_accuracy, LogisticBaseline};
pub use config::TrainConfig;
pub use metrics::{sign_test, sign_test_counts, ClassMetrics, EvalReport, SignTest, UtterancePrediction};
pub use train::{build_model, evaluate, train, EpochRecord, History, TrainOutcome};
