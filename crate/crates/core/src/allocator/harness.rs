//! Seeded three-VM scenarios for comparing refinement start points.
//!
//! Each scenario profiles a gaming, an AI-inference and a web VM from synthetic traces,
//! builds the predicted models the optimizer sees, and hides a perturbed copy of those
//! models as the "real" system. Thresholds are the hidden QoS at the allocation that is
//! best under the hidden models, loosened by a small tolerance, so every scenario is
//! satisfiable.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    backtrack_allocate, equal_split, generate_candidates_capped, proportional_split, refine_search, AllocError,
    ModelOracle, RefineProblem, RefinementReport, Strategy, Threshold,
};
use crate::board::{default_quanta, HardwareCapacity, Quanta};
use crate::objective::{materialize, VmDefinition, VmSpec};
use crate::profiling::{generate_synthetic_trace, summarize_profile, SynthSpec};
use crate::qos::{ImpactFactorParams, MetricKind, QosModel};
use crate::types::{AllocationVector, WorkloadClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    /// Relative slack granted on every threshold.
    pub tolerance: f64,
    pub max_trials: u32,
    pub candidate_cap: usize,
    /// Relative spread of hidden slopes around the predicted ones.
    pub alpha_spread: f64,
    /// Relative spread of hidden anchors.
    pub anchor_spread: f64,
    /// Utilization weight of every harness VM.
    pub lambda_util: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            tolerance: 0.02,
            max_trials: 200,
            candidate_cap: 512,
            alpha_spread: 0.3,
            anchor_spread: 0.05,
            lambda_util: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    pub cap: HardwareCapacity,
    pub quanta: Quanta,
    /// Specs with predicted models, as the optimizer sees them.
    pub specs: Vec<VmSpec>,
    pub hidden: ModelOracle,
    pub thresholds: Vec<Vec<Threshold>>,
    /// Best allocation under the hidden models.
    pub target: Vec<AllocationVector>,
}

pub fn harness_board() -> HardwareCapacity {
    HardwareCapacity {
        p_cores: 6,
        e_cores: 8,
        memory_mib: 65536,
        gpu_slices: 10,
        gpu_slice_percent: 10,
        gpu_mem_mib: 8192,
    }
}

/// Allocation each VM is profiled under when run alone: half the board.
fn profiling_allocation() -> AllocationVector {
    AllocationVector::new(3, 4, 32768, 5)
}

fn perturb(model: &QosModel, rng: &mut ChaCha8Rng, cfg: &HarnessConfig) -> QosModel {
    let mut factors = BTreeMap::new();
    for (&k, p) in &model.factors {
        let scale = 1.0 + rng.gen_range(-cfg.alpha_spread..=cfg.alpha_spread);
        let alpha = (p.alpha() * scale).min(0.95 * p.alpha_limit());
        let params = ImpactFactorParams::new(alpha, p.r_min(), p.r_prof()).unwrap_or(*p);
        factors.insert(k, params);
    }
    let anchor = model.anchor * (1.0 + rng.gen_range(-cfg.anchor_spread..=cfg.anchor_spread));
    QosModel::new(model.kind, anchor, factors, model.renormalize).unwrap_or_else(|_| model.clone())
}

pub fn synthetic_scenario(seed: u64, cfg: &HarnessConfig) -> Result<SyntheticScenario, AllocError> {
    let cap = harness_board();
    let quanta = default_quanta(&cap);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = [WorkloadClass::Gaming, WorkloadClass::AiInference, WorkloadClass::WebMicroservice];

    let mut specs = Vec::new();
    let mut hidden = Vec::new();
    for class in classes {
        let size = rng.gen_range(0.8..1.2);
        let trace = generate_synthetic_trace(&SynthSpec::new(class, size, rng.gen()));
        let profile = summarize_profile(&trace, &profiling_allocation(), &quanta)
            .expect("synthetic traces are never empty");
        let def = VmDefinition {
            vm_id: class.as_str().to_string(),
            workload_class: Some(class),
            lambda_util: Some(cfg.lambda_util),
            ..Default::default()
        };
        let spec = materialize(&def, &profile, &cap, &quanta)?;
        let h: BTreeMap<String, QosModel> = spec
            .qos_models
            .iter()
            .map(|(name, m)| (name.clone(), perturb(m, &mut rng, cfg)))
            .collect();
        specs.push(spec);
        hidden.push(h);
    }

    let true_specs: Vec<VmSpec> = specs
        .iter()
        .zip(&hidden)
        .map(|(s, h)| VmSpec {
            qos_models: h.clone(),
            ..s.clone()
        })
        .collect();
    let sets = true_specs
        .iter()
        .map(|s| generate_candidates_capped(s, &cap, &quanta, cfg.candidate_cap))
        .collect::<Result<Vec<_>, _>>()?;
    let target = backtrack_allocate(&true_specs, &cap, &sets)?.allocations;

    let hidden = ModelOracle { models: hidden };
    let thresholds = specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.qos_metrics
                .iter()
                .map(|m| {
                    let q = hidden.models[i][&m.name]
                        .predict_qos(&target[i])
                        .expect("target candidates are above every floor");
                    let target = match m.kind {
                        MetricKind::Throughput => q * (1.0 - cfg.tolerance),
                        MetricKind::Latency | MetricKind::Ratio => q * (1.0 + cfg.tolerance),
                    };
                    Threshold {
                        metric: m.name.clone(),
                        kind: m.kind,
                        target,
                    }
                })
                .collect()
        })
        .collect();

    Ok(SyntheticScenario {
        cap,
        quanta,
        specs,
        hidden,
        thresholds,
        target,
    })
}

/// Allocation a strategy starts refinement from.
pub fn start_allocation(
    sc: &SyntheticScenario,
    strategy: Strategy,
    cfg: &HarnessConfig,
) -> Result<Vec<AllocationVector>, AllocError> {
    match strategy {
        Strategy::EqualSplit => Ok(equal_split(&sc.specs, &sc.cap, &sc.quanta)),
        Strategy::ProportionalSplit => proportional_split(&sc.specs, &sc.cap, &sc.quanta),
        Strategy::OptimizedSplit => {
            let sets = sc
                .specs
                .iter()
                .map(|s| generate_candidates_capped(s, &sc.cap, &sc.quanta, cfg.candidate_cap))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(backtrack_allocate(&sc.specs, &sc.cap, &sets)?.allocations)
        }
    }
}

pub fn run_scenario(
    sc: &SyntheticScenario,
    strategies: &[Strategy],
    cfg: &HarnessConfig,
) -> Result<Vec<RefinementReport>, AllocError> {
    let problem = RefineProblem {
        specs: &sc.specs,
        cap: &sc.cap,
        quanta: &sc.quanta,
        thresholds: &sc.thresholds,
    };
    strategies
        .iter()
        .map(|&st| {
            let start = start_allocation(sc, st, cfg)?;
            Ok(refine_search(&problem, st, &start, &sc.hidden, cfg.max_trials))
        })
        .collect()
}

/// Trial counts of every strategy over a run of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub strategy: Strategy,
    pub trials: Vec<u32>,
    pub satisfied: usize,
    /// Median over seeds, counting a run that never met its thresholds as `max_trials`.
    pub median: f64,
}

fn median(v: &[u32]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable();
    let n = s.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        s[n / 2] as f64
    } else {
        (s[n / 2 - 1] + s[n / 2]) as f64 / 2.0
    }
}

pub fn compare_strategies(
    seeds: impl IntoIterator<Item = u64>,
    strategies: &[Strategy],
    cfg: &HarnessConfig,
) -> Result<Vec<TrialSummary>, AllocError> {
    let mut per: Vec<(Vec<u32>, Vec<u32>, usize)> = vec![(Vec::new(), Vec::new(), 0); strategies.len()];
    for seed in seeds {
        let sc = synthetic_scenario(seed, cfg)?;
        for (slot, report) in per.iter_mut().zip(run_scenario(&sc, strategies, cfg)?) {
            slot.0.push(report.trials);
            slot.1.push(if report.satisfied { report.trials } else { cfg.max_trials });
            slot.2 += usize::from(report.satisfied);
        }
    }
    Ok(strategies
        .iter()
        .zip(per)
        .map(|(&strategy, (trials, effective, satisfied))| TrialSummary {
            strategy,
            median: median(&effective),
            trials,
            satisfied,
        })
        .collect())
}
