use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::board::{HardwareCapacity, Quanta};
use crate::objective::VmSpec;
use crate::qos::{MetricKind, QosModel};
use crate::types::{AllocationVector, ResourceKind};

/// Where a refinement run starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    EqualSplit,
    ProportionalSplit,
    OptimizedSplit,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::EqualSplit, Strategy::ProportionalSplit, Strategy::OptimizedSplit];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::EqualSplit => "equal",
            Strategy::ProportionalSplit => "proportional",
            Strategy::OptimizedSplit => "optimized",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "equal" | "equal_split" => Ok(Strategy::EqualSplit),
            "proportional" | "proportional_split" => Ok(Strategy::ProportionalSplit),
            "optimized" | "optimized_split" => Ok(Strategy::OptimizedSplit),
            _ => Err(format!("unknown strategy `{s}`")),
        }
    }
}

/// Required value of one metric of one VM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub metric: String,
    pub kind: MetricKind,
    pub target: f64,
}

impl Threshold {
    fn shortfall(&self, measured: Option<f64>) -> f64 {
        match measured {
            Some(q) => self.kind.shortfall(q, self.target),
            None => UNRUNNABLE,
        }
    }
}

/// Shortfall charged when the workload cannot run at all.
const UNRUNNABLE: f64 = 1e6;

/// Measured QoS of a running VM. `None` means the allocation cannot run the workload.
pub trait QosOracle {
    fn measure(&self, vm: usize, metric: &str, r: &AllocationVector) -> Option<f64>;
}

/// Oracle backed by per-VM response models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOracle {
    pub models: Vec<BTreeMap<String, QosModel>>,
}

impl QosOracle for ModelOracle {
    fn measure(&self, vm: usize, metric: &str, r: &AllocationVector) -> Option<f64> {
        self.models.get(vm)?.get(metric)?.predict_qos(r).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub strategy: Strategy,
    /// Single-resource modifications made.
    pub trials: u32,
    pub final_allocations: Vec<AllocationVector>,
    pub satisfied: bool,
}

/// Static inputs of a refinement run.
#[derive(Debug, Clone, Copy)]
pub struct RefineProblem<'a> {
    pub specs: &'a [VmSpec],
    pub cap: &'a HardwareCapacity,
    pub quanta: &'a Quanta,
    /// Per VM, in spec order.
    pub thresholds: &'a [Vec<Threshold>],
}

fn goodness(t: &Threshold, q: Option<f64>) -> f64 {
    match q {
        None => 0.0,
        Some(q) => match t.kind {
            MetricKind::Throughput => q / t.target,
            MetricKind::Latency | MetricKind::Ratio => t.target / q.max(f64::MIN_POSITIVE),
        },
    }
}

/// Smallest predicted relative improvement worth a trial.
const MIN_GAIN: f64 = 1e-4;

/// Resources to try for VM `i`, most promising first according to its own model.
/// Resources whose next quantum is predicted to change nothing are left out.
fn bottleneck_order(p: &RefineProblem, i: usize, t: &Threshold, r: &AllocationVector) -> Vec<ResourceKind> {
    let spec = &p.specs[i];
    let model = spec.qos_models.get(&t.metric);
    let allowed = |k: ResourceKind| {
        p.quanta.step(k).is_some()
            && match k {
                ResourceKind::PCore => spec.feasibility.allow_p_cores,
                ResourceKind::ECore => spec.feasibility.allow_e_cores,
                _ => true,
            }
    };
    let Some(model) = model else {
        return ResourceKind::ALL.into_iter().filter(|&k| allowed(k)).collect();
    };
    let base = goodness(t, model.predict_qos(r).ok());
    let mut scored: Vec<(ResourceKind, f64)> = model
        .factors
        .keys()
        .copied()
        .filter(|&k| allowed(k))
        .map(|k| {
            let step = p.quanta.step(k).unwrap_or(1);
            let bumped = r.with(k, r.get(k) + step);
            (k, goodness(t, model.predict_qos(&bumped).ok()) - base)
        })
        .filter(|&(_, gain)| gain > MIN_GAIN)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.into_iter().map(|(k, _)| k).collect()
}

/// True when VM `j`'s models predict every threshold met at `r`.
fn predicted_ok(p: &RefineProblem, j: usize, r: &AllocationVector) -> bool {
    p.thresholds[j].iter().all(|t| {
        p.specs[j]
            .qos_models
            .get(&t.metric)
            .and_then(|m| m.predict_qos(r).ok())
            .is_some_and(|q| t.kind.meets(q, t.target))
    })
}

/// Moves one quantum of `kind` to VM `i`, from free capacity or else from the VM with the
/// most allocation above its demand among those predicted to keep meeting their own
/// thresholds without it. False when neither is possible.
fn grant(p: &RefineProblem, alloc: &mut [AllocationVector], i: usize, kind: ResourceKind) -> bool {
    let Some(step) = p.quanta.step(kind) else { return false };
    let used: u64 = alloc.iter().map(|a| a.get(kind)).sum();
    if used + step <= p.cap.total(kind) {
        alloc[i].set(kind, alloc[i].get(kind) + step);
        return true;
    }
    let mut donor: Option<(usize, f64)> = None;
    for (j, a) in alloc.iter().enumerate() {
        if j == i || a.get(kind) < step {
            continue;
        }
        if !predicted_ok(p, j, &a.with(kind, a.get(kind) - step)) {
            continue;
        }
        let slack = a.get(kind) as f64 - p.specs[j].profile.demand(kind);
        if donor.is_none_or(|(_, s)| slack > s) {
            donor = Some((j, slack));
        }
    }
    let Some((j, _)) = donor else { return false };
    alloc[j].set(kind, alloc[j].get(kind) - step);
    alloc[i].set(kind, alloc[i].get(kind) + step);
    true
}

/// Greedy trial-and-error tuning against a hidden oracle: repeatedly give the VM with the
/// worst shortfall one quantum of its most promising resource.
pub fn refine_search(
    problem: &RefineProblem,
    strategy: Strategy,
    start: &[AllocationVector],
    oracle: &dyn QosOracle,
    max_trials: u32,
) -> RefinementReport {
    let mut alloc = start.to_vec();
    let mut trials = 0;
    loop {
        let mut worst: Option<(usize, &Threshold, f64)> = None;
        for (i, ts) in problem.thresholds.iter().enumerate() {
            for t in ts {
                let short = t.shortfall(oracle.measure(i, &t.metric, &alloc[i]));
                if short > 0.0 && worst.is_none_or(|(_, _, w)| short > w) {
                    worst = Some((i, t, short));
                }
            }
        }
        let Some((i, t, _)) = worst else {
            return RefinementReport {
                strategy,
                trials,
                final_allocations: alloc,
                satisfied: true,
            };
        };
        if trials >= max_trials {
            break;
        }
        let order = bottleneck_order(problem, i, t, &alloc[i]);
        if !order.into_iter().any(|k| grant(problem, &mut alloc, i, k)) {
            break;
        }
        trials += 1;
    }
    RefinementReport {
        strategy,
        trials,
        final_allocations: alloc,
        satisfied: false,
    }
}
