//! Static hypervisor resource allocation: board and profile ingestion, a parametric QoS
//! response model, composite scoring and a depth-first backtracking allocator.

pub mod allocator;
pub mod board;
pub mod learned;
pub mod objective;
pub mod pipeline;
pub mod profiling;
pub mod qos;
pub mod scenario;
pub mod types;

pub use board::{default_quanta, parse_board_config, HardwareCapacity, Quanta, ResourceQuantum};
pub use types::{AllocationVector, ResourceKind, WorkloadClass};
pub use objective::{
    evaluate_vm, global_score, materialize, vm_opt_score, vm_perf_score, vm_util_score, Feasibility, VmDefinition,
    VmEvaluation, VmSpec,
};
pub use allocator::{
    backtrack_allocate, brute_force_allocate, equal_split, generate_candidates, proportional_split, refine_search,
    AllocError, CandidateSet, RefinementReport, SearchResult, Strategy,
};
pub use learned::{compare_models, mlp_fit, mlp_predict, ComparisonReport, LearnedError, MlpConfig, MlpModel};
pub use scenario::{
    emit_launch_script, parse_launch_script, read_scenario, write_scenario, GeneratorInfo, ScenarioDocument,
    ScenarioError,
};
pub use pipeline::{materialize_all, optimize, optimize_scenario, what_if, OptimizeOptions, PipelineError, WhatIfReport};
