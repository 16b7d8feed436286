//! Candidate grids, the depth-first backtracking allocator, a brute-force oracle, baseline
//! splits and a simulated trial-and-error refinement loop.

mod baseline;
mod candidates;
pub mod harness;
mod refine;
mod search;

use thiserror::Error;

use crate::objective::ObjectiveError;
use crate::types::ResourceKind;

pub use baseline::{equal_split, proportional_split};
pub use candidates::{generate_candidates, generate_candidates_capped, CandidateSet, DEFAULT_CANDIDATE_CAP};
pub use refine::{refine_search, ModelOracle, QosOracle, RefineProblem, RefinementReport, Strategy, Threshold};
pub use search::{
    backtrack_allocate, backtrack_allocate_with, brute_force_allocate, search_order, upper_bound, SearchOptions,
    SearchResult, BRUTE_FORCE_LIMIT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("feasible set of `{vm_id}` is empty")]
    EmptyFeasibleSet { vm_id: String },
    #[error("no joint assignment fits the board capacity")]
    NoFeasibleAssignment,
    #[error("{combinations} combinations exceed the brute-force limit")]
    TooLarge { combinations: f64 },
    #[error("total profiled demand for {0} is zero")]
    ZeroTotalDemand(ResourceKind),
    #[error("at least one VM is required")]
    NoVms,
    #[error("{specs} specs but {sets} candidate sets")]
    Misaligned { specs: usize, sets: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}
