//! Scenario documents and the launch stubs derived from them.

mod canonical;
mod launch;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canonical::{to_canonical_json, FLOAT_DECIMALS};
pub use launch::{emit_launch_script, parse_launch_script};

use crate::allocator::SearchResult;
use crate::board::HardwareCapacity;
use crate::objective::{evaluate_vm, VmSpec};
use crate::qos::QosMetricSpec;
use crate::types::{AllocationVector, ResourceKind, WorkloadClass};

pub const TOOL_NAME: &str = "hyperscen";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario has no VMs")]
    NoVms,
    #[error("{specs} specs but {allocations} allocations")]
    LengthMismatch { specs: usize, allocations: usize },
    #[error("allocations exceed board capacity for {0}")]
    OverCapacity(ResourceKind),
    #[error("invalid scenario JSON: {0}")]
    Json(String),
    #[error("launch script line {line}: {reason}")]
    MalformedLaunchScript { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub tool: String,
    pub version: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Left empty unless the caller stamps it, so identical inputs give identical bytes.
    #[serde(default)]
    pub generated_at: Option<String>,
}

impl Default for GeneratorInfo {
    fn default() -> Self {
        GeneratorInfo {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            generated_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioVm {
    pub vm_id: String,
    pub workload_class: WorkloadClass,
    pub qos_metrics: Vec<QosMetricSpec>,
    pub lambda_util: f64,
    pub allocation: AllocationVector,
    pub predicted_qos: BTreeMap<String, Option<f64>>,
    pub metric_scores: BTreeMap<String, f64>,
    pub utilization: BTreeMap<ResourceKind, f64>,
    pub perf_score: f64,
    pub util_score: f64,
    pub opt_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub board: HardwareCapacity,
    pub vms: Vec<ScenarioVm>,
    pub global_score: f64,
    /// Search stopped at its time budget; the allocation is the best found so far.
    #[serde(default)]
    pub truncated: bool,
    pub generator: GeneratorInfo,
}

impl ScenarioDocument {
    pub fn to_json(&self) -> String {
        to_canonical_json(self).expect("scenario documents always serialize")
    }

    pub fn allocations(&self) -> Vec<AllocationVector> {
        self.vms.iter().map(|v| v.allocation).collect()
    }
}

pub fn read_scenario(text: &str) -> Result<ScenarioDocument, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Json(e.to_string()))
}

/// Builds the document for a search result and renders it canonically. The returned
/// document holds exactly the values its JSON carries (floats at six decimals).
pub fn write_scenario(
    result: &SearchResult,
    specs: &[VmSpec],
    cap: &HardwareCapacity,
    generator: GeneratorInfo,
) -> Result<(ScenarioDocument, String), ScenarioError> {
    if specs.is_empty() {
        return Err(ScenarioError::NoVms);
    }
    if specs.len() != result.allocations.len() {
        return Err(ScenarioError::LengthMismatch {
            specs: specs.len(),
            allocations: result.allocations.len(),
        });
    }
    let total = AllocationVector::sum(&result.allocations);
    if let Some(k) = ResourceKind::ALL.into_iter().find(|&k| total.get(k) > cap.total(k)) {
        return Err(ScenarioError::OverCapacity(k));
    }
    let vms = specs
        .iter()
        .zip(&result.allocations)
        .map(|(spec, r)| {
            let e = evaluate_vm(spec, r);
            ScenarioVm {
                vm_id: spec.vm_id.clone(),
                workload_class: spec.workload_class,
                qos_metrics: spec.qos_metrics.clone(),
                lambda_util: spec.lambda_util,
                allocation: *r,
                predicted_qos: e.predicted_qos,
                metric_scores: e.metric_scores,
                utilization: e.utilization,
                perf_score: e.perf_score,
                util_score: e.util_score,
                opt_score: e.opt_score,
            }
        })
        .collect();
    let doc = ScenarioDocument {
        board: *cap,
        vms,
        global_score: result.best_score,
        truncated: result.truncated,
        generator,
    };
    let text = doc.to_json();
    let doc = read_scenario(&text)?;
    Ok((doc, text))
}
