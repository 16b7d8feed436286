//! Per-VM and global optimization scores.
//!
//! A VM's score is its weighted QoS utility plus `lambda_util` times its weighted
//! utilization efficiency; the global score sums VM scores.

mod definition;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiling::{utilization_fraction, ProfileVector};
use crate::qos::{normalize_score, QosMetricSpec, QosModel};
use crate::types::{is_valid_vm_id, AllocationVector, ResourceKind, WorkloadClass};

pub use definition::{default_feasibility, materialize, VmDefinition, DEFAULT_LAMBDA_UTIL};

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("invalid VM spec `{vm_id}`: {reason}")]
    InvalidSpec { vm_id: String, reason: String },
    #[error("resource {0} has positive utilization weight but zero allocation")]
    ZeroAllocation(ResourceKind),
    #[error("{specs} specs but {allocations} allocations")]
    LengthMismatch { specs: usize, allocations: usize },
}

/// Per-VM feasibility box and allowed core types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub min: AllocationVector,
    pub max: AllocationVector,
    #[serde(default = "yes")]
    pub allow_p_cores: bool,
    #[serde(default = "yes")]
    pub allow_e_cores: bool,
}

fn yes() -> bool {
    true
}

impl Feasibility {
    pub fn contains(&self, r: &AllocationVector) -> bool {
        self.min.fits_within(r)
            && r.fits_within(&self.max)
            && (self.allow_p_cores || r.c_p == 0)
            && (self.allow_e_cores || r.c_e == 0)
    }

    /// Effective `[lo, hi]` of one resource after core-type restrictions.
    pub fn range(&self, kind: ResourceKind) -> (u64, u64) {
        let blocked = match kind {
            ResourceKind::PCore => !self.allow_p_cores,
            ResourceKind::ECore => !self.allow_e_cores,
            _ => false,
        };
        if blocked {
            (0, 0)
        } else {
            (self.min.get(kind), self.max.get(kind))
        }
    }
}

/// Everything the optimizer needs to know about one VM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmSpec {
    pub vm_id: String,
    pub workload_class: WorkloadClass,
    pub qos_metrics: Vec<QosMetricSpec>,
    /// Utilization weights per resource; must sum to one.
    pub util_weights: BTreeMap<ResourceKind, f64>,
    pub lambda_util: f64,
    pub feasibility: Feasibility,
    /// Response model per metric name.
    pub qos_models: BTreeMap<String, QosModel>,
    pub profile: ProfileVector,
}

impl VmSpec {
    fn invalid(&self, reason: impl Into<String>) -> ObjectiveError {
        ObjectiveError::InvalidSpec {
            vm_id: self.vm_id.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !is_valid_vm_id(&self.vm_id) {
            return Err(self.invalid("vm_id must be 1-64 characters of [A-Za-z0-9_.-]"));
        }
        if self.qos_metrics.is_empty() {
            return Err(self.invalid("at least one QoS metric is required"));
        }
        let w: f64 = self.qos_metrics.iter().map(|m| m.weight).sum();
        if (w - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(self.invalid(format!("QoS weights sum to {w}, expected 1")));
        }
        for m in &self.qos_metrics {
            if !(0.0..=1.0).contains(&m.weight) {
                return Err(self.invalid(format!("weight of `{}` outside [0, 1]", m.name)));
            }
            if !(m.slo_target > 0.0) {
                return Err(self.invalid(format!("slo_target of `{}` must be positive", m.name)));
            }
            if !self.qos_models.contains_key(&m.name) {
                return Err(self.invalid(format!("no QoS model for metric `{}`", m.name)));
            }
        }
        let v: f64 = self.util_weights.values().sum();
        if (v - 1.0).abs() > WEIGHT_TOLERANCE || self.util_weights.values().any(|&x| x < 0.0) {
            return Err(self.invalid(format!("utilization weights sum to {v}, expected 1")));
        }
        if !(0.0..=1.0).contains(&self.lambda_util) {
            return Err(self.invalid(format!("lambda_util {} outside [0, 1]", self.lambda_util)));
        }
        if !self.feasibility.min.fits_within(&self.feasibility.max) {
            return Err(self.invalid("feasibility min exceeds max"));
        }
        Ok(())
    }
}

/// Weighted sum of normalized predicted QoS. A metric whose model rejects the allocation
/// (below a resource floor) contributes zero.
pub fn vm_perf_score(spec: &VmSpec, r: &AllocationVector) -> f64 {
    spec.qos_metrics
        .iter()
        .map(|m| {
            let s = spec
                .qos_models
                .get(&m.name)
                .and_then(|model| model.predict_qos(r).ok())
                .map(|q| normalize_score(m, q))
                .unwrap_or(0.0);
            m.weight * s
        })
        .sum()
}

/// Predicted fraction of one resource consumed: peak demand over allocation, capped at 1.
pub fn predicted_utilization(profile: &ProfileVector, r: &AllocationVector, kind: ResourceKind) -> f64 {
    utilization_fraction(profile.demand(kind), r.get(kind) as f64)
}

/// Weighted utilization efficiency.
pub fn vm_util_score(spec: &VmSpec, r: &AllocationVector) -> Result<f64, ObjectiveError> {
    let mut total = 0.0;
    for (&kind, &v) in &spec.util_weights {
        if v == 0.0 {
            continue;
        }
        if r.get(kind) == 0 {
            return Err(ObjectiveError::ZeroAllocation(kind));
        }
        total += v * predicted_utilization(&spec.profile, r, kind);
    }
    Ok(total)
}

/// `perf + lambda_util * util`. Weighted resources with nothing allocated add no
/// efficiency credit.
pub fn vm_opt_score(spec: &VmSpec, r: &AllocationVector) -> f64 {
    let util: f64 = spec
        .util_weights
        .iter()
        .map(|(&kind, &v)| v * predicted_utilization(&spec.profile, r, kind))
        .sum();
    vm_perf_score(spec, r) + spec.lambda_util * util
}

/// Sum of per-VM scores.
pub fn global_score(specs: &[VmSpec], allocations: &[AllocationVector]) -> Result<f64, ObjectiveError> {
    if specs.len() != allocations.len() {
        return Err(ObjectiveError::LengthMismatch {
            specs: specs.len(),
            allocations: allocations.len(),
        });
    }
    Ok(specs.iter().zip(allocations).map(|(s, r)| vm_opt_score(s, r)).sum())
}

/// Full score breakdown for one VM at one allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmEvaluation {
    pub vm_id: String,
    pub allocation: AllocationVector,
    /// Predicted QoS per metric; `None` when the allocation cannot run the workload.
    pub predicted_qos: BTreeMap<String, Option<f64>>,
    pub metric_scores: BTreeMap<String, f64>,
    pub utilization: BTreeMap<ResourceKind, f64>,
    /// Resources allocated at or below the workload's floor.
    pub below_minimum: Vec<ResourceKind>,
    pub perf_score: f64,
    pub util_score: f64,
    pub opt_score: f64,
}

pub fn evaluate_vm(spec: &VmSpec, r: &AllocationVector) -> VmEvaluation {
    let mut predicted_qos = BTreeMap::new();
    let mut metric_scores = BTreeMap::new();
    let mut below_minimum = Vec::new();
    for m in &spec.qos_metrics {
        let q = spec.qos_models.get(&m.name).map(|model| model.predict_qos(r));
        let q = match q {
            Some(Ok(q)) => Some(q),
            Some(Err(crate::qos::QosError::BelowMinimum { resource: Some(k), .. })) => {
                if !below_minimum.contains(&k) {
                    below_minimum.push(k);
                }
                None
            }
            _ => None,
        };
        metric_scores.insert(m.name.clone(), q.map(|q| normalize_score(m, q)).unwrap_or(0.0));
        predicted_qos.insert(m.name.clone(), q);
    }
    below_minimum.sort();
    let utilization = ResourceKind::ALL
        .into_iter()
        .map(|k| (k, predicted_utilization(&spec.profile, r, k)))
        .collect();
    let util_score = spec
        .util_weights
        .iter()
        .map(|(&kind, &v)| v * predicted_utilization(&spec.profile, r, kind))
        .sum();
    let perf_score = vm_perf_score(spec, r);
    VmEvaluation {
        vm_id: spec.vm_id.clone(),
        allocation: *r,
        predicted_qos,
        metric_scores,
        utilization,
        below_minimum,
        perf_score,
        util_score,
        opt_score: perf_score + spec.lambda_util * util_score,
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::profiling::{GpuSummary, MemorySummary, UtilSummary};
    use crate::qos::{ImpactFactorParams, MetricKind, QosKind};

    pub fn profile(r_prof: AllocationVector, r_min: AllocationVector, peak_rss: f64) -> ProfileVector {
        ProfileVector {
            cpu_p: UtilSummary { max_pct: 50.0, median_pct: 40.0 },
            cpu_e: UtilSummary { max_pct: 20.0, median_pct: 10.0 },
            mem: MemorySummary {
                peak_rss_mib: peak_rss,
                wss_mib: r_min.m as f64,
                swap_seen: false,
            },
            gpu: GpuSummary {
                max_busy_pct: 0.0,
                median_busy_pct: 0.0,
                peak_mem_mib: 0.0,
            },
            r_prof,
            r_min,
        }
    }

    /// Single latency metric over P-cores and memory.
    pub fn web_spec(id: &str) -> VmSpec {
        let r_prof = AllocationVector::new(4, 0, 2048, 0);
        let r_min = AllocationVector::new(1, 0, 1024, 0);
        let mut factors = BTreeMap::new();
        factors.insert(ResourceKind::PCore, ImpactFactorParams::new(0.2, 1.0, 4.0).unwrap());
        factors.insert(ResourceKind::MemoryMib, ImpactFactorParams::new(0.5 / 1024.0, 1024.0, 2048.0).unwrap());
        let model = QosModel::new(QosKind::Latency, 250.0, factors, true).unwrap();
        let mut qos_models = BTreeMap::new();
        qos_models.insert("p99".to_string(), model);
        let mut util_weights = BTreeMap::new();
        util_weights.insert(ResourceKind::MemoryMib, 0.5);
        util_weights.insert(ResourceKind::PCore, 0.5);
        VmSpec {
            vm_id: id.into(),
            workload_class: WorkloadClass::WebMicroservice,
            qos_metrics: vec![QosMetricSpec {
                name: "p99".into(),
                kind: MetricKind::Latency,
                weight: 1.0,
                slo_target: 500.0,
            }],
            util_weights,
            lambda_util: 0.05,
            feasibility: Feasibility {
                min: AllocationVector::new(2, 0, 1152, 0),
                max: AllocationVector::new(6, 0, 4096, 0),
                allow_p_cores: true,
                allow_e_cores: false,
            },
            qos_models,
            profile: profile(r_prof, r_min, 2048.0),
        }
    }
}
