//! MDL regressor: a small MLP trained with AdamW on phase-normalized
//! residual features.

mod io;
mod mlp;
mod optim;
mod train;

pub use io::{load_model, load_model_for, model_from_bytes, model_to_bytes, save_model};
pub use mlp::{Gradients, MlpModel, DEFAULT_HIDDEN};
pub use optim::{lr_at, AdamW, TrainConfig};
pub use train::{
    cycle_examples, evaluate, metrics_csv, regression_metrics, spearman, train, validation_set,
    EpochMetrics, RegressionMetrics, TrainOutcome,
};
