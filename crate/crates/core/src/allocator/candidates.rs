use serde::{Deserialize, Serialize};

use super::AllocError;
use crate::board::{HardwareCapacity, Quanta};
use crate::objective::{vm_opt_score, VmSpec};
use crate::types::{AllocationVector, ResourceKind};

pub const DEFAULT_CANDIDATE_CAP: usize = 512;

/// Discrete allocations considered for one VM, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub vm_id: String,
    pub candidates: Vec<AllocationVector>,
    /// `vm_opt_score` of each candidate, aligned with `candidates`.
    pub scores: Vec<f64>,
}

impl CandidateSet {
    /// Builds a set from explicit allocations and scores, sorting into heuristic order.
    pub fn from_scored(vm_id: impl Into<String>, mut pairs: Vec<(AllocationVector, f64)>) -> Self {
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.to_array().cmp(&b.0.to_array())));
        pairs.dedup_by(|a, b| a.0 == b.0);
        let (candidates, scores) = pairs.into_iter().unzip();
        CandidateSet {
            vm_id: vm_id.into(),
            candidates,
            scores,
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn best_score(&self) -> f64 {
        self.scores.first().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

fn axis(spec: &VmSpec, cap: &HardwareCapacity, quanta: &Quanta, kind: ResourceKind, scale: u64) -> Vec<u64> {
    let (lo, hi) = spec.feasibility.range(kind);
    let hi = hi.min(cap.total(kind));
    let Some(step) = quanta.step(kind) else {
        return if lo == 0 { vec![0] } else { Vec::new() };
    };
    let start = quanta.round_up(kind, lo);
    let stride = step * scale;
    let mut v = Vec::new();
    let mut x = start;
    while x <= hi {
        v.push(x);
        x += stride;
    }
    v
}

/// Quantum grid over the VM's feasibility box, clipped to the board, best first.
pub fn generate_candidates(
    spec: &VmSpec,
    cap: &HardwareCapacity,
    quanta: &Quanta,
) -> Result<CandidateSet, AllocError> {
    generate_candidates_capped(spec, cap, quanta, DEFAULT_CANDIDATE_CAP)
}

/// As [`generate_candidates`], doubling every step until the grid has at most `max`
/// points.
pub fn generate_candidates_capped(
    spec: &VmSpec,
    cap: &HardwareCapacity,
    quanta: &Quanta,
    max: usize,
) -> Result<CandidateSet, AllocError> {
    let max = max.max(1);
    let mut scale = 1;
    let axes = loop {
        let axes: Vec<Vec<u64>> = ResourceKind::ALL
            .iter()
            .map(|&k| axis(spec, cap, quanta, k, scale))
            .collect();
        let n: usize = axes.iter().map(Vec::len).product();
        if n == 0 {
            return Err(AllocError::EmptyFeasibleSet {
                vm_id: spec.vm_id.clone(),
            });
        }
        if n <= max {
            break axes;
        }
        scale *= 2;
    };

    let mut pairs = Vec::new();
    for &c_p in &axes[0] {
        for &c_e in &axes[1] {
            for &m in &axes[2] {
                for &g in &axes[3] {
                    let r = AllocationVector::new(c_p, c_e, m, g);
                    pairs.push((r, vm_opt_score(spec, &r)));
                }
            }
        }
    }
    Ok(CandidateSet::from_scored(spec.vm_id.clone(), pairs))
}
