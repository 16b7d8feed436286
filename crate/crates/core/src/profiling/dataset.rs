//! Synthetic profiling dataset with a hidden ground-truth QoS oracle.
//!
//! Each workload gets a profile from a synthetic trace and a hidden response built from
//! closed-form curves the factor model only approximates (pooled cores, saturating GPU,
//! paging knee), plus bounded multiplicative noise.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::summary::{summarize_profile, utilization_fraction, ProfileVector};
use super::synth::{generate_synthetic_trace, SynthSpec};
use crate::board::{default_quanta, HardwareCapacity, Quanta};
use crate::qos::{curves, factor_bounds, QosKind};
use crate::types::{AllocationVector, ResourceKind, WorkloadClass};

/// Classes covered by the generated dataset, with their key QoS metric.
pub const DATASET_CLASSES: [(WorkloadClass, QosKind); 3] = [
    (WorkloadClass::Gaming, QosKind::Throughput),
    (WorkloadClass::AiInference, QosKind::Throughput),
    (WorkloadClass::WebMicroservice, QosKind::Latency),
];

const WORKLOADS_PER_CLASS: usize = 1;
const NOISE: f64 = 0.05;

/// Per-resource utilization snapshot, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilSnapshot {
    pub p_core: f64,
    pub e_core: f64,
    pub memory_mib: f64,
    pub gpu_slice: f64,
}

impl UtilSnapshot {
    pub fn of(profile: &ProfileVector, r: &AllocationVector) -> Self {
        let u = |k: ResourceKind| utilization_fraction(profile.demand(k), r.get(k) as f64);
        Self {
            p_core: u(ResourceKind::PCore),
            e_core: u(ResourceKind::ECore),
            memory_mib: u(ResourceKind::MemoryMib),
            gpu_slice: u(ResourceKind::GpuSlice),
        }
    }

    pub fn get(&self, kind: ResourceKind) -> f64 {
        match kind {
            ResourceKind::PCore => self.p_core,
            ResourceKind::ECore => self.e_core,
            ResourceKind::MemoryMib => self.memory_mib,
            ResourceKind::GpuSlice => self.gpu_slice,
        }
    }
}

/// One observation: workload, allocation, profile, measured QoS and utilization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub workload_id: String,
    pub r: AllocationVector,
    pub p: ProfileVector,
    pub qos_kind: QosKind,
    pub qos_value: f64,
    pub util: UtilSnapshot,
}

/// Workload ids are `<class>-<index>`; returns the class part.
pub fn class_of_workload(workload_id: &str) -> Option<WorkloadClass> {
    let (class, _) = workload_id.rsplit_once('-')?;
    class.parse().ok()
}

/// Hidden ground truth for one workload, built from closed-form curves rather than the
/// impact-factor family: Michaelis-Menten over pooled cores (an E-core worth `e_weight`
/// P-cores), exponential saturation over GPU slices and a paging knee below peak RSS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadOracle {
    pub workload_id: String,
    pub class: WorkloadClass,
    pub size: f64,
    pub profile: ProfileVector,
    pub kind: QosKind,
    /// QoS at the profiled allocation.
    pub anchor: f64,
    pub e_weight: f64,
    /// Half-saturation point in effective cores; `None` when the workload uses no CPU.
    pub k_half: Option<f64>,
    /// GPU saturation rate per slice; `None` when the workload uses no GPU.
    pub gpu_rate: Option<f64>,
    pub knee_beta: f64,
    pub noise: f64,
}

impl WorkloadOracle {
    /// Relative speed at `r`; higher is better.
    fn speed(&self, r: &AllocationVector) -> Option<f64> {
        if r.m as f64 <= self.profile.r_min.m as f64 {
            return None;
        }
        let mut s = 1.0;
        if let Some(k) = self.k_half {
            let c = r.c_p as f64 + self.e_weight * r.c_e as f64;
            if c <= 0.0 {
                return None;
            }
            s *= curves::michaelis_menten(1.0, k, c);
        }
        if let Some(a) = self.gpu_rate {
            if r.g == 0 {
                return None;
            }
            s *= curves::saturation(1.0, a, r.g as f64);
        }
        let peak = self.profile.r_prof.m as f64;
        Some(s / curves::memory_knee(0.0, 1.0, self.knee_beta, peak, r.m as f64))
    }

    /// Noise-free QoS at `r`, or `None` when `r` cannot run the workload.
    pub fn true_qos(&self, r: &AllocationVector) -> Option<f64> {
        let rel = self.speed(r)? / self.speed(&self.profile.r_prof)?;
        Some(match self.kind {
            QosKind::Throughput => self.anchor * rel,
            QosKind::Latency => self.anchor / rel,
        })
    }

    /// One noisy measurement at `r`.
    pub fn measure(&self, r: &AllocationVector, rng: &mut impl Rng) -> Option<f64> {
        let q = self.true_qos(r)?;
        Some(q * (1.0 + rng.gen_range(-self.noise..=self.noise)))
    }
}

/// Generated records (ordered by class, then index) and the oracles behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub records: Vec<DatasetRecord>,
    pub oracles: Vec<WorkloadOracle>,
}

/// Board used for synthetic profiling runs: 6 P-cores, 8 E-cores, 64 GiB, 10 GPU slices.
pub fn reference_board() -> HardwareCapacity {
    HardwareCapacity {
        p_cores: 6,
        e_cores: 8,
        memory_mib: 65536,
        gpu_slices: 10,
        gpu_slice_percent: 10,
        gpu_mem_mib: 8192,
    }
}

fn base_anchor(class: WorkloadClass, size: f64) -> f64 {
    match class {
        WorkloadClass::Gaming => 58.0 / size.sqrt(),
        WorkloadClass::AiInference => 102.0 / size,
        WorkloadClass::WebMicroservice => 250.0 * size,
        WorkloadClass::RtosControl => 20.0 * size,
    }
}

/// Builds the hidden oracle for one workload.
pub fn make_oracle(
    workload_id: String,
    class: WorkloadClass,
    kind: QosKind,
    size: f64,
    board: &HardwareCapacity,
    quanta: &Quanta,
    rng: &mut ChaCha8Rng,
) -> WorkloadOracle {
    let trace = generate_synthetic_trace(&SynthSpec::new(class, size, rng.gen()));
    let profile = summarize_profile(&trace, &board.as_allocation(), quanta)
        .expect("synthetic traces are never empty");
    let e_weight = rng.gen_range(0.4..0.7);
    let cores = profile.r_prof.c_p as f64 + e_weight * profile.r_prof.c_e as f64;
    let k_half = (cores > 0.0).then(|| cores * rng.gen_range(0.3..1.0));
    let gpu_rate = (profile.r_prof.g > 0).then(|| rng.gen_range(1.0..3.0) / profile.r_prof.g as f64);
    WorkloadOracle {
        workload_id,
        class,
        size,
        profile,
        kind,
        anchor: base_anchor(class, size) * rng.gen_range(0.9..1.1),
        e_weight,
        k_half,
        gpu_rate,
        knee_beta: rng.gen_range(2.0..4.0),
        noise: NOISE,
    }
}

/// Grid of allocatable values of one resource for sweeps: from half to twice the profiled
/// demand, above the floor and never beyond the board.
fn sweep_values(oracle: &WorkloadOracle, quanta: &Quanta, board: &HardwareCapacity, kind: ResourceKind) -> Vec<u64> {
    let Some((r_min, r_prof)) = factor_bounds(&oracle.profile, quanta, kind) else {
        return vec![0];
    };
    let step = quanta.step(kind).unwrap_or(1);
    let lo = (r_min as u64 + step).max(quanta.round_up(kind, (r_prof / 2.0).ceil() as u64));
    let hi = (2 * r_prof as u64).max(lo).min(board.total(kind).max(lo));
    (lo..=hi).step_by(step as usize).collect()
}

/// Generates `n_per_class` unique observations for each class in [`DATASET_CLASSES`].
pub fn generate_dataset(n_per_class: usize, seed: u64) -> SyntheticDataset {
    let n_per_class = n_per_class.max(1);
    let board = reference_board();
    let quanta = default_quanta(&board);
    let mut records = Vec::with_capacity(n_per_class * DATASET_CLASSES.len());
    let mut oracles = Vec::new();

    for (class, kind) in DATASET_CLASSES {
        let n_workloads = n_per_class.min(WORKLOADS_PER_CLASS);
        for w in 0..n_workloads {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ ((class.index() as u64) << 32 | w as u64),
            );
            let size = 1.0 + 0.25 * w as f64;
            let oracle = make_oracle(format!("{class}-{w:02}"), class, kind, size, &board, &quanta, &mut rng);
            let count = n_per_class / n_workloads + usize::from(w < n_per_class % n_workloads);

            let grids: Vec<Vec<u64>> = ResourceKind::ALL
                .iter()
                .map(|&k| sweep_values(&oracle, &quanta, &board, k))
                .collect();
            let r_prof = oracle.profile.r_prof;
            let mut seen: HashSet<AllocationVector> = HashSet::new();
            let mut chosen: Vec<AllocationVector> = Vec::with_capacity(count);

            // the profiled point and a memory-only variation of it come first
            chosen.push(r_prof);
            seen.insert(r_prof);
            if count > 1 {
                let mem_grid = &grids[ResourceKind::MemoryMib.index()];
                if let Some(&m) = mem_grid.iter().rev().find(|&&m| m != r_prof.m) {
                    let r = r_prof.with(ResourceKind::MemoryMib, m);
                    seen.insert(r);
                    chosen.push(r);
                }
            }
            let mut attempts = 0;
            while chosen.len() < count && attempts < 100_000 {
                attempts += 1;
                let mut r = r_prof;
                let dims: Vec<ResourceKind> = ResourceKind::ALL
                    .into_iter()
                    .filter(|k| grids[k.index()].len() > 1)
                    .collect();
                let n_vary = if rng.gen_bool(0.5) { 1 } else { rng.gen_range(1..=dims.len()) };
                let mut pool = dims.clone();
                for _ in 0..n_vary {
                    let idx = rng.gen_range(0..pool.len());
                    let k = pool.swap_remove(idx);
                    let grid = &grids[k.index()];
                    r.set(k, grid[rng.gen_range(0..grid.len())]);
                }
                if seen.insert(r) {
                    chosen.push(r);
                }
            }

            for r in chosen {
                let q = oracle.measure(&r, &mut rng).expect("sweep values sit above every floor");
                records.push(DatasetRecord {
                    workload_id: oracle.workload_id.clone(),
                    r,
                    p: oracle.profile.clone(),
                    qos_kind: kind,
                    qos_value: q,
                    util: UtilSnapshot::of(&oracle.profile, &r),
                });
            }
            oracles.push(oracle);
        }
    }
    SyntheticDataset { records, oracles }
}

/// Serializes records as JSON lines.
pub fn records_to_jsonl(records: &[DatasetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Parses JSON-lines records; blank lines are skipped.
pub fn records_from_jsonl(text: &str) -> Result<Vec<DatasetRecord>, super::ProfilingError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| super::ProfilingError::MalformedDataset { line: i + 1, reason: e.to_string() })
        })
        .collect()
}
