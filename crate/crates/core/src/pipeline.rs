//! End-to-end composition shared by the command line and the HTTP service: materialize
//! definitions, search or split, render the scenario, and evaluate what-if allocations.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{
    backtrack_allocate_with, equal_split, generate_candidates_capped, proportional_split, AllocError, SearchOptions,
    SearchResult, Strategy, DEFAULT_CANDIDATE_CAP,
};
use crate::board::{default_quanta, HardwareCapacity};
use crate::objective::{evaluate_vm, global_score, materialize, ObjectiveError, VmDefinition, VmEvaluation, VmSpec};
use crate::profiling::ProfileVector;
use crate::scenario::{write_scenario, GeneratorInfo, ScenarioDocument, ScenarioError};
use crate::types::{AllocationVector, ResourceKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("at least one VM is required")]
    NoVms,
    #[error("VM `{0}` has no profile")]
    MissingProfile(String),
    #[error("duplicate vm_id `{0}`")]
    DuplicateVm(String),
    #[error("{vms} VMs but {allocations} allocations")]
    LengthMismatch { vms: usize, allocations: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    /// Start from a baseline split instead of searching.
    #[serde(default)]
    pub baseline: Option<Strategy>,
    #[serde(default, with = "secs")]
    pub time_budget: Option<Duration>,
    #[serde(default = "default_cap")]
    pub candidate_cap: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_cap() -> usize {
    DEFAULT_CANDIDATE_CAP
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            baseline: None,
            time_budget: None,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            seed: None,
        }
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(&d.as_secs_f64()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        let v: Option<f64> = Option::deserialize(d)?;
        v.map(|x| Duration::try_from_secs_f64(x).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Completes every definition. A profile in `profiles` wins over one embedded in the
/// definition.
pub fn materialize_all(
    defs: &[VmDefinition],
    profiles: &BTreeMap<String, ProfileVector>,
    cap: &HardwareCapacity,
) -> Result<Vec<VmSpec>, PipelineError> {
    if defs.is_empty() {
        return Err(PipelineError::NoVms);
    }
    let q = default_quanta(cap);
    let mut seen = std::collections::BTreeSet::new();
    defs.iter()
        .map(|d| {
            if !seen.insert(d.vm_id.as_str()) {
                return Err(PipelineError::DuplicateVm(d.vm_id.clone()));
            }
            let profile = profiles
                .get(&d.vm_id)
                .or(d.profile.as_ref())
                .ok_or_else(|| PipelineError::MissingProfile(d.vm_id.clone()))?;
            Ok(materialize(d, profile, cap, &q)?)
        })
        .collect()
}

/// Searches for the best joint allocation, or scores a baseline split.
pub fn optimize(specs: &[VmSpec], cap: &HardwareCapacity, opts: &OptimizeOptions) -> Result<SearchResult, PipelineError> {
    if specs.is_empty() {
        return Err(PipelineError::NoVms);
    }
    let q = default_quanta(cap);
    let allocations = match opts.baseline {
        Some(Strategy::EqualSplit) => equal_split(specs, cap, &q),
        Some(Strategy::ProportionalSplit) => proportional_split(specs, cap, &q)?,
        Some(Strategy::OptimizedSplit) | None => {
            let sets = specs
                .iter()
                .map(|s| generate_candidates_capped(s, cap, &q, opts.candidate_cap))
                .collect::<Result<Vec<_>, _>>()?;
            let search = SearchOptions {
                prune: true,
                time_budget: opts.time_budget,
            };
            return Ok(backtrack_allocate_with(specs, cap, &sets, &search)?);
        }
    };
    Ok(SearchResult {
        best_score: global_score(specs, &allocations)?,
        allocations,
        nodes_visited: 0,
        nodes_pruned: 0,
        truncated: false,
    })
}

/// [`optimize`] followed by [`write_scenario`]; returns the document and its canonical JSON.
pub fn optimize_scenario(
    specs: &[VmSpec],
    cap: &HardwareCapacity,
    opts: &OptimizeOptions,
) -> Result<(SearchResult, ScenarioDocument, String), PipelineError> {
    let result = optimize(specs, cap, opts)?;
    let generator = GeneratorInfo {
        seed: opts.seed,
        ..GeneratorInfo::default()
    };
    let (doc, text) = write_scenario(&result, specs, cap, generator)?;
    Ok((result, doc, text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfReport {
    pub vms: Vec<VmEvaluation>,
    /// Sum of per-VM scores.
    pub global_score: f64,
    /// Resources whose total exceeds the board.
    pub over_capacity: Vec<ResourceKind>,
    /// Per VM, resources outside its feasibility box.
    pub infeasible: BTreeMap<String, Vec<ResourceKind>>,
}

/// Scores candidate allocations without searching. Capacity and feasibility violations
/// are reported, not rejected.
pub fn what_if(
    specs: &[VmSpec],
    cap: &HardwareCapacity,
    allocations: &[AllocationVector],
) -> Result<WhatIfReport, PipelineError> {
    if specs.len() != allocations.len() {
        return Err(PipelineError::LengthMismatch {
            vms: specs.len(),
            allocations: allocations.len(),
        });
    }
    let vms: Vec<VmEvaluation> = specs.iter().zip(allocations).map(|(s, r)| evaluate_vm(s, r)).collect();
    let total = AllocationVector::sum(allocations);
    let over_capacity = ResourceKind::ALL
        .into_iter()
        .filter(|&k| total.get(k) > cap.total(k))
        .collect();
    let mut infeasible = BTreeMap::new();
    for (s, r) in specs.iter().zip(allocations) {
        let bad: Vec<ResourceKind> = ResourceKind::ALL
            .into_iter()
            .filter(|&k| {
                let (lo, hi) = s.feasibility.range(k);
                !(lo..=hi).contains(&r.get(k))
            })
            .collect();
        if !bad.is_empty() {
            infeasible.insert(s.vm_id.clone(), bad);
        }
    }
    Ok(WhatIfReport {
        global_score: vms.iter().map(|v| v.opt_score).sum(),
        vms,
        over_capacity,
        infeasible,
    })
}
