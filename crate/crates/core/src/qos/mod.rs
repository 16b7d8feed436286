//! Parametric QoS response model.
//!
//! Each resource contributes an impact factor in `(0, 1]`; factors multiply into an overall
//! factor that scales (throughput) or divides (latency) the QoS measured at the profiled
//! allocation.

mod calibrate;
pub mod curves;
mod impact;
mod model;
mod score;

use thiserror::Error;

use crate::types::ResourceKind;

pub use calibrate::{calibrate_alpha, fit_alpha_least_squares, fit_model, minimize_scalar, QosSample};
pub use impact::{impact_factor, ImpactFactorParams, FACTOR_FLOOR};
pub use model::{compose_factors, factor_bounds, predict_qos, QosKind, QosModel};
pub use score::{class_templates, normalize_score, qos_template, MetricKind, MetricTemplate, QosMetricSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QosError {
    #[error("invalid impact parameters: {0}")]
    InvalidParams(String),
    #[error("invalid QoS model: {0}")]
    InvalidModel(String),
    #[error("allocation {amount} of {} is at or below the minimum {r_min}", resource.map(|r| r.as_str()).unwrap_or("resource"))]
    BelowMinimum {
        resource: Option<ResourceKind>,
        amount: f64,
        r_min: f64,
    },
    #[error("calibrated alpha {alpha} is outside the valid range (0, {max})")]
    CalibrationOutOfRange { alpha: f64, max: f64 },
    #[error("samples are degenerate: need at least two distinct allocations above r_min")]
    DegenerateSamples,
    #[error("invalid calibration sample: {0}")]
    InvalidSample(String),
}

impl QosError {
    pub(crate) fn with_resource(self, kind: ResourceKind) -> Self {
        match self {
            QosError::BelowMinimum { amount, r_min, .. } => QosError::BelowMinimum {
                resource: Some(kind),
                amount,
                r_min,
            },
            other => other,
        }
    }
}
