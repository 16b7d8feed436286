//! Loose VM definitions as users write them, and their completion into [`VmSpec`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Feasibility, ObjectiveError, VmSpec};
use crate::board::{HardwareCapacity, Quanta};
use crate::profiling::ProfileVector;
use crate::qos::{factor_bounds, class_templates, QosMetricSpec, QosModel};
use crate::types::{AllocationVector, ResourceKind, WorkloadClass};

pub const DEFAULT_LAMBDA_UTIL: f64 = 0.05;

/// A VM as supplied by a user. Everything but the id and class is optional; a complete
/// [`VmSpec`] document is also a valid definition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VmDefinition {
    pub vm_id: String,
    pub workload_class: Option<WorkloadClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qos_metrics: Option<Vec<QosMetricSpec>>,
    /// Profiled QoS per metric name; overrides the class template anchor.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub anchors: BTreeMap<String, f64>,
    /// Impact-factor slopes per resource.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub alphas: BTreeMap<ResourceKind, f64>,
    /// Explicit models; metrics without one get a model built from the profile.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub qos_models: BTreeMap<String, QosModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub util_weights: Option<BTreeMap<ResourceKind, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_util: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<Feasibility>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_p_cores: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_e_cores: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileVector>,
}

impl From<&VmSpec> for VmDefinition {
    fn from(s: &VmSpec) -> Self {
        VmDefinition {
            vm_id: s.vm_id.clone(),
            workload_class: Some(s.workload_class),
            qos_metrics: Some(s.qos_metrics.clone()),
            anchors: BTreeMap::new(),
            alphas: BTreeMap::new(),
            qos_models: s.qos_models.clone(),
            util_weights: Some(s.util_weights.clone()),
            lambda_util: Some(s.lambda_util),
            feasibility: Some(s.feasibility),
            allow_p_cores: None,
            allow_e_cores: None,
            profile: Some(s.profile.clone()),
        }
    }
}

/// Default search box: from one quantum above the floor up to half again the profiled
/// demand, clipped to the board. Unused resources are pinned at zero.
pub fn default_feasibility(profile: &ProfileVector, cap: &HardwareCapacity, quanta: &Quanta) -> Feasibility {
    let mut min = AllocationVector::ZERO;
    let mut max = AllocationVector::ZERO;
    for kind in ResourceKind::ALL {
        let (Some((r_min, r_prof)), Some(step)) = (factor_bounds(profile, quanta, kind), quanta.step(kind)) else {
            continue;
        };
        let (r_min, r_prof) = (r_min as u64, r_prof as u64);
        let lo = r_min + step;
        let hi = quanta
            .round_up(kind, (r_prof * 3).div_ceil(2))
            .max(r_prof + step)
            .min(cap.total(kind))
            .max(lo);
        min.set(kind, lo);
        max.set(kind, hi);
    }
    Feasibility {
        min,
        max,
        allow_p_cores: true,
        allow_e_cores: true,
    }
}

fn equal_util_weights(profile: &ProfileVector, quanta: &Quanta) -> BTreeMap<ResourceKind, f64> {
    let used: Vec<ResourceKind> = ResourceKind::ALL
        .into_iter()
        .filter(|&k| quanta.step(k).is_some() && profile.demand(k) > 0.0)
        .collect();
    let n = used.len().max(1) as f64;
    used.into_iter().map(|k| (k, 1.0 / n)).collect()
}

/// Completes a definition into a validated spec, filling gaps from the class template and
/// the profile.
pub fn materialize(
    def: &VmDefinition,
    profile: &ProfileVector,
    cap: &HardwareCapacity,
    quanta: &Quanta,
) -> Result<VmSpec, ObjectiveError> {
    let invalid = |reason: String| ObjectiveError::InvalidSpec {
        vm_id: def.vm_id.clone(),
        reason,
    };
    let class = def
        .workload_class
        .ok_or_else(|| invalid("workload_class is required".into()))?;
    let templates = class_templates(class);
    let metrics = def
        .qos_metrics
        .clone()
        .unwrap_or_else(|| templates.iter().map(|t| t.spec.clone()).collect());

    let mut models = BTreeMap::new();
    for m in &metrics {
        if let Some(model) = def.qos_models.get(&m.name) {
            models.insert(m.name.clone(), model.clone());
            continue;
        }
        let anchor = def
            .anchors
            .get(&m.name)
            .copied()
            .or_else(|| templates.iter().find(|t| t.spec.name == m.name).map(|t| t.default_anchor))
            .ok_or_else(|| invalid(format!("no anchor or model for metric `{}`", m.name)))?;
        let model = QosModel::from_profile(m.kind.qos_kind(), anchor, profile, quanta, &def.alphas)
            .map_err(|e| invalid(format!("metric `{}`: {e}", m.name)))?;
        models.insert(m.name.clone(), model);
    }

    let mut feasibility = def
        .feasibility
        .unwrap_or_else(|| default_feasibility(profile, cap, quanta));
    if let Some(p) = def.allow_p_cores {
        feasibility.allow_p_cores = p;
    }
    if let Some(e) = def.allow_e_cores {
        feasibility.allow_e_cores = e;
    }

    let spec = VmSpec {
        vm_id: def.vm_id.clone(),
        workload_class: class,
        qos_metrics: metrics,
        util_weights: def
            .util_weights
            .clone()
            .unwrap_or_else(|| equal_util_weights(profile, quanta)),
        lambda_util: def.lambda_util.unwrap_or(DEFAULT_LAMBDA_UTIL),
        feasibility,
        qos_models: models,
        profile: profile.clone(),
    };
    spec.validate()?;
    Ok(spec)
}
