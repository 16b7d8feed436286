//! Learned baseline: a small MLP regressor and the train/eval comparison against the
//! parametric model.

mod compare;
mod mlp;

use thiserror::Error;

pub use compare::{
    compare_models, features_of, fit_parametric, mlp_fit, mlp_predict, record_features, split_indices,
    CompareOptions, ComparisonReport, ModelReport, MseStat, TargetReport, MIN_RECORDS,
};
pub use mlp::{train_mlp, MlpConfig, MlpModel, Network, Scaler, TrainHistory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnedError {
    #[error("{have} records, at least {need} needed")]
    TooFewRecords { have: usize, need: usize },
    #[error("expected {expected} features, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("parametric fit failed: {0}")]
    Fit(String),
}
