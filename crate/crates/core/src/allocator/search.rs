use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{AllocError, CandidateSet};
use crate::board::HardwareCapacity;
use crate::objective::{global_score, VmSpec};
use crate::types::AllocationVector;

/// Largest candidate product the brute-force oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e6;

/// Slack on the prune test so rounding in the bound never cuts an improving branch.
const PRUNE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub prune: bool,
    /// Stop after this long and return the incumbent, flagged as truncated.
    pub time_budget: Option<Duration>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            prune: true,
            time_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// One allocation per VM, in input order.
    pub allocations: Vec<AllocationVector>,
    pub best_score: f64,
    pub nodes_visited: u64,
    pub nodes_pruned: u64,
    #[serde(default)]
    pub truncated: bool,
}

/// Order in which VMs are assigned: best attainable score first, input order on ties.
pub fn search_order(sets: &[CandidateSet]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by(|&a, &b| sets[b].best_score().total_cmp(&sets[a].best_score()));
    order
}

fn best_fitting(set: &CandidateSet, remaining: &AllocationVector) -> f64 {
    // candidates are sorted best first
    set.candidates
        .iter()
        .position(|c| c.fits_within(remaining))
        .map_or(f64::NEG_INFINITY, |i| set.scores[i])
}

/// Optimistic score of assigning `sets[i..]` within `remaining`: each VM's best candidate
/// that fits on its own. Minus infinity when some VM has nothing that fits.
pub fn upper_bound(i: usize, remaining: &AllocationVector, sets: &[CandidateSet]) -> f64 {
    sets.iter().skip(i).map(|s| best_fitting(s, remaining)).sum()
}

fn check_inputs(specs: &[VmSpec], sets: &[CandidateSet]) -> Result<(), AllocError> {
    if specs.is_empty() {
        return Err(AllocError::NoVms);
    }
    if specs.len() != sets.len() {
        return Err(AllocError::Misaligned {
            specs: specs.len(),
            sets: sets.len(),
        });
    }
    Ok(())
}

fn finish(
    specs: &[VmSpec],
    sets: &[CandidateSet],
    order: &[usize],
    picks: &[usize],
    visited: u64,
    pruned: u64,
    truncated: bool,
) -> Result<SearchResult, AllocError> {
    let mut allocations = vec![AllocationVector::ZERO; specs.len()];
    for (depth, &vm) in order.iter().enumerate() {
        allocations[vm] = sets[vm].candidates[picks[depth]];
    }
    let best_score = global_score(specs, &allocations)?;
    Ok(SearchResult {
        allocations,
        best_score,
        nodes_visited: visited,
        nodes_pruned: pruned,
        truncated,
    })
}

struct Dfs {
    sets: Vec<CandidateSet>,
    prune: bool,
    deadline: Option<Instant>,
    chosen: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    visited: u64,
    pruned: u64,
    truncated: bool,
}

impl Dfs {
    fn run(&mut self, depth: usize, remaining: AllocationVector, score: f64) {
        if depth == self.sets.len() {
            if self.best.as_ref().is_none_or(|(s, _)| score > *s) {
                self.best = Some((score, self.chosen.clone()));
            }
            return;
        }
        for ci in 0..self.sets[depth].candidates.len() {
            if self.truncated {
                return;
            }
            let c = self.sets[depth].candidates[ci];
            if !c.fits_within(&remaining) {
                continue;
            }
            self.visited += 1;
            if self.visited.is_multiple_of(1024) && self.deadline.is_some_and(|d| Instant::now() >= d) {
                self.truncated = true;
                return;
            }
            let s = score + self.sets[depth].scores[ci];
            let rem = remaining.saturating_sub(&c);
            if self.prune {
                let incumbent = self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
                // an infeasible tail bounds to minus infinity and is cut even without an incumbent
                if s + upper_bound(depth + 1, &rem, &self.sets) <= incumbent - PRUNE_EPS {
                    self.pruned += 1;
                    continue;
                }
            }
            self.chosen.push(ci);
            self.run(depth + 1, rem, s);
            self.chosen.pop();
        }
    }
}

/// Depth-first backtracking with bound pruning. Keeps the incumbent on strict
/// improvement only, so the first assignment found in heuristic order wins ties.
pub fn backtrack_allocate(
    specs: &[VmSpec],
    cap: &HardwareCapacity,
    sets: &[CandidateSet],
) -> Result<SearchResult, AllocError> {
    backtrack_allocate_with(specs, cap, sets, &SearchOptions::default())
}

pub fn backtrack_allocate_with(
    specs: &[VmSpec],
    cap: &HardwareCapacity,
    sets: &[CandidateSet],
    options: &SearchOptions,
) -> Result<SearchResult, AllocError> {
    check_inputs(specs, sets)?;
    let order = search_order(sets);
    let mut dfs = Dfs {
        sets: order.iter().map(|&i| sets[i].clone()).collect(),
        prune: options.prune,
        deadline: options.time_budget.map(|b| Instant::now() + b),
        chosen: Vec::with_capacity(sets.len()),
        best: None,
        visited: 0,
        pruned: 0,
        truncated: false,
    };
    dfs.run(0, cap.as_allocation(), 0.0);
    let Some((_, picks)) = dfs.best else {
        return Err(AllocError::NoFeasibleAssignment);
    };
    finish(specs, sets, &order, &picks, dfs.visited, dfs.pruned, dfs.truncated)
}

/// Exhaustive enumeration in the same VM order and tie-break as the backtracking search.
pub fn brute_force_allocate(
    specs: &[VmSpec],
    cap: &HardwareCapacity,
    sets: &[CandidateSet],
) -> Result<SearchResult, AllocError> {
    check_inputs(specs, sets)?;
    let combinations: f64 = sets.iter().map(|s| s.len() as f64).product();
    if combinations > BRUTE_FORCE_LIMIT {
        return Err(AllocError::TooLarge { combinations });
    }
    if combinations == 0.0 {
        return Err(AllocError::NoFeasibleAssignment);
    }
    let order = search_order(sets);
    let ordered: Vec<&CandidateSet> = order.iter().map(|&i| &sets[i]).collect();
    let capacity = cap.as_allocation();
    let n = ordered.len();
    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut visited = 0u64;
    loop {
        visited += 1;
        let mut total = AllocationVector::ZERO;
        let mut score = 0.0;
        for (d, set) in ordered.iter().enumerate() {
            total = total.saturating_add(&set.candidates[idx[d]]);
            score += set.scores[idx[d]];
        }
        if total.fits_within(&capacity) && best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, idx.clone()));
        }
        // odometer, last position fastest
        let mut d = n;
        loop {
            if d == 0 {
                let Some((_, picks)) = best else {
                    return Err(AllocError::NoFeasibleAssignment);
                };
                return finish(specs, sets, &order, &picks, visited, 0, false);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < ordered[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}
