//! Fixed allocation instances for the benchmarks.

use hyperscen_core::allocator::generate_candidates_capped;
use hyperscen_core::profiling::{generate_synthetic_trace, summarize_profile, SynthSpec};
use hyperscen_core::{default_quanta, materialize, CandidateSet, HardwareCapacity, VmDefinition, VmSpec, WorkloadClass};

pub struct Instance {
    pub cap: HardwareCapacity,
    pub specs: Vec<VmSpec>,
    pub sets: Vec<CandidateSet>,
}

pub fn board() -> HardwareCapacity {
    HardwareCapacity {
        p_cores: 12,
        e_cores: 8,
        memory_mib: 65536,
        gpu_slices: 10,
        gpu_slice_percent: 10,
        gpu_mem_mib: 8192,
    }
}

const CLASSES: [WorkloadClass; 3] = [WorkloadClass::Gaming, WorkloadClass::AiInference, WorkloadClass::WebMicroservice];

/// `n` VMs cycling through the classes, each with at most `cap_n` candidates.
pub fn instance(n: usize, cap_n: usize) -> Instance {
    let cap = board();
    let q = default_quanta(&cap);
    let specs: Vec<VmSpec> = (0..n)
        .map(|i| {
            let class = CLASSES[i % CLASSES.len()];
            let trace = generate_synthetic_trace(&SynthSpec::new(class, 0.5, i as u64));
            let profile = summarize_profile(&trace, &cap.as_allocation(), &q).expect("synthetic trace summarizes");
            let def = VmDefinition {
                vm_id: format!("vm{i}"),
                workload_class: Some(class),
                ..Default::default()
            };
            materialize(&def, &profile, &cap, &q).expect("synthetic spec is valid")
        })
        .collect();
    let sets = specs
        .iter()
        .map(|s| generate_candidates_capped(s, &cap, &q, cap_n).expect("spec fits the bench board"))
        .collect();
    Instance { cap, specs, sets }
}
