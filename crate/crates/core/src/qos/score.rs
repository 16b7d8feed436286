//! Normalized QoS scores and per-class metric templates.

use serde::{Deserialize, Serialize};

use super::model::QosKind;
use crate::types::WorkloadClass;

/// How a metric is scored against its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Higher is better; saturates at the target.
    Throughput,
    /// Lower is better; linear to zero at the target.
    Latency,
    /// Miss-ratio style; full marks up to the target, steep penalty beyond it.
    Ratio,
}

impl MetricKind {
    /// Direction of the underlying response model.
    pub fn qos_kind(self) -> QosKind {
        match self {
            MetricKind::Throughput => QosKind::Throughput,
            MetricKind::Latency | MetricKind::Ratio => QosKind::Latency,
        }
    }

    /// True when `q` meets `threshold` for this kind.
    pub fn meets(self, q: f64, threshold: f64) -> bool {
        match self {
            MetricKind::Throughput => q >= threshold,
            MetricKind::Latency | MetricKind::Ratio => q <= threshold,
        }
    }

    /// Relative shortfall of `q` against `threshold`; zero when met.
    pub fn shortfall(self, q: f64, threshold: f64) -> f64 {
        match self {
            MetricKind::Throughput => ((threshold - q) / threshold).max(0.0),
            MetricKind::Latency | MetricKind::Ratio => ((q - threshold) / threshold).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosMetricSpec {
    pub name: String,
    pub kind: MetricKind,
    pub weight: f64,
    pub slo_target: f64,
}

/// Steepness of the penalty past a ratio-kind target.
const RATIO_PENALTY: f64 = 10.0;

/// Maps a QoS value to `[0, 1]` against the metric's SLO target.
pub fn normalize_score(spec: &QosMetricSpec, q: f64) -> f64 {
    let slo = spec.slo_target;
    let s = match spec.kind {
        MetricKind::Latency => 1.0 - q / slo,
        MetricKind::Throughput => q / slo,
        MetricKind::Ratio => {
            if q <= slo {
                1.0
            } else {
                1.0 - RATIO_PENALTY * (q - slo) / slo
            }
        }
    };
    if s.is_nan() {
        0.0
    } else {
        s.clamp(0.0, 1.0)
    }
}

/// A template metric together with a typical profiled value to anchor its model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTemplate {
    pub spec: QosMetricSpec,
    pub default_anchor: f64,
}

fn metric(name: &str, kind: MetricKind, weight: f64, slo_target: f64, anchor: f64) -> MetricTemplate {
    MetricTemplate {
        spec: QosMetricSpec {
            name: name.to_string(),
            kind,
            weight,
            slo_target,
        },
        default_anchor: anchor,
    }
}

/// Primary and secondary metrics per workload class, with default targets and anchors.
pub fn class_templates(class: WorkloadClass) -> Vec<MetricTemplate> {
    match class {
        // FPS 8 : frame-time jitter 2
        WorkloadClass::Gaming => vec![
            metric("fps", MetricKind::Throughput, 0.8, 60.0, 58.0),
            metric("frame_jitter_ms", MetricKind::Latency, 0.2, 8.0, 2.5),
        ],
        WorkloadClass::AiInference => vec![
            metric("p99_latency_ms", MetricKind::Latency, 0.8, 400.0, 150.0),
            metric("tokens_per_s", MetricKind::Throughput, 0.2, 80.0, 102.0),
        ],
        WorkloadClass::WebMicroservice => vec![
            metric("p99_latency_us", MetricKind::Latency, 0.8, 500.0, 250.0),
            metric("rps_under_slo", MetricKind::Throughput, 0.2, 4000.0, 5000.0),
        ],
        WorkloadClass::RtosControl => vec![
            metric("deadline_miss_ratio", MetricKind::Ratio, 0.8, 0.01, 0.002),
            metric("jitter_us", MetricKind::Latency, 0.2, 50.0, 20.0),
        ],
    }
}

/// QoS metric specs of a workload class.
pub fn qos_template(class: WorkloadClass) -> Vec<QosMetricSpec> {
    class_templates(class).into_iter().map(|t| t.spec).collect()
}
