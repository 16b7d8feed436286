use serde::{Deserialize, Serialize};

use super::trace::TraceSeries;
use super::ProfilingError;
use crate::board::Quanta;
use crate::types::{AllocationVector, ResourceKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilSummary {
    pub max_pct: f64,
    pub median_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemorySummary {
    pub peak_rss_mib: f64,
    /// Working-set estimate: median RSS over the trace.
    pub wss_mib: f64,
    pub swap_seen: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpuSummary {
    pub max_busy_pct: f64,
    pub median_busy_pct: f64,
    pub peak_mem_mib: f64,
}

/// Condensed demand of one workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileVector {
    pub cpu_p: UtilSummary,
    pub cpu_e: UtilSummary,
    pub mem: MemorySummary,
    pub gpu: GpuSummary,
    /// Peak demand rounded up to quanta.
    pub r_prof: AllocationVector,
    /// Allocation at or below which the workload cannot run: zero compute units, and the
    /// working set for memory.
    pub r_min: AllocationVector,
}

impl ProfileVector {
    /// Peak demand of one resource in its native unit.
    ///
    /// Cores and GPU slices read from the quantized envelope; memory uses peak RSS.
    pub fn demand(&self, kind: ResourceKind) -> f64 {
        match kind {
            ResourceKind::MemoryMib => self.mem.peak_rss_mib,
            _ => self.r_prof.get(kind) as f64,
        }
    }

    /// Numeric features in a fixed order, for learned models.
    pub fn features(&self) -> Vec<f64> {
        let mut v = vec![
            self.cpu_p.max_pct,
            self.cpu_p.median_pct,
            self.cpu_e.max_pct,
            self.cpu_e.median_pct,
            self.mem.peak_rss_mib,
            self.mem.wss_mib,
            if self.mem.swap_seen { 1.0 } else { 0.0 },
            self.gpu.max_busy_pct,
            self.gpu.median_busy_pct,
            self.gpu.peak_mem_mib,
        ];
        v.extend(self.r_prof.to_array().iter().map(|&x| x as f64));
        v.extend(self.r_min.to_array().iter().map(|&x| x as f64));
        v
    }

    pub const FEATURE_COUNT: usize = 18;
}

/// Fraction of an allocation consumed by `demand`, capped at one. Zero allocation reads as
/// zero utilization.
pub fn utilization_fraction(demand: f64, allocated: f64) -> f64 {
    if allocated <= 0.0 {
        0.0
    } else {
        (demand / allocated).min(1.0)
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn summary_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    (*v.last().unwrap_or(&0.0), median(&v))
}

/// Units of a resource needed to carry `pct` percent of `units`, never below one unit when
/// there is any activity.
fn busy_units(pct: f64, units: u64) -> u64 {
    if pct <= 0.0 || units == 0 {
        return 0;
    }
    let raw = pct / 100.0 * units as f64;
    // ceil with a guard against 2.0000000001 style artifacts
    ((raw - 1e-9).ceil() as u64).max(1)
}

/// Condenses a trace into a profile.
///
/// `profiled_on` is the allocation the trace was recorded under; utilization percentages
/// are relative to it.
pub fn summarize_profile(
    trace: &TraceSeries,
    profiled_on: &AllocationVector,
    quanta: &Quanta,
) -> Result<ProfileVector, ProfilingError> {
    if trace.is_empty() {
        return Err(ProfilingError::EmptyTrace);
    }
    let s = &trace.samples;
    let (p_max, p_med) = summary_of(s.iter().map(|x| x.cpu_p_util_pct));
    let (e_max, e_med) = summary_of(s.iter().map(|x| x.cpu_e_util_pct));
    let (rss_max, rss_med) = summary_of(s.iter().map(|x| x.mem_rss_mib));
    let (g_max, g_med) = summary_of(s.iter().map(|x| x.gpu_busy_pct));
    let (gmem_max, _) = summary_of(s.iter().map(|x| x.gpu_mem_mib));
    let swap_seen = s.iter().any(|x| x.swap_mib > 0.0);

    let allocatable = |kind: ResourceKind| quanta.step(kind).is_some();
    let mut r_prof = AllocationVector::ZERO;
    let mut r_min = AllocationVector::ZERO;

    for (kind, pct, units) in [
        (ResourceKind::PCore, p_max, profiled_on.c_p),
        (ResourceKind::ECore, e_max, profiled_on.c_e),
        (ResourceKind::GpuSlice, g_max, profiled_on.g),
    ] {
        if !allocatable(kind) {
            continue;
        }
        let busy = busy_units(pct, units);
        if busy > 0 {
            r_prof.set(kind, quanta.round_up(kind, busy));
        }
    }
    if allocatable(ResourceKind::MemoryMib) {
        r_prof.m = quanta.round_up(ResourceKind::MemoryMib, rss_max.ceil() as u64);
        r_min.m = quanta.round_up(ResourceKind::MemoryMib, rss_med.ceil() as u64);
    }

    Ok(ProfileVector {
        cpu_p: UtilSummary { max_pct: p_max, median_pct: p_med },
        cpu_e: UtilSummary { max_pct: e_max, median_pct: e_med },
        mem: MemorySummary {
            peak_rss_mib: rss_max,
            wss_mib: rss_med,
            swap_seen,
        },
        gpu: GpuSummary {
            max_busy_pct: g_max,
            median_busy_pct: g_med,
            peak_mem_mib: gmem_max,
        },
        r_prof,
        r_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::board::{default_quanta, HardwareCapacity};
    use crate::profiling::trace::TraceSample;
    use proptest::prelude::*;

    fn testbed() -> HardwareCapacity {
        HardwareCapacity {
            p_cores: 6,
            e_cores: 8,
            memory_mib: 65536,
            gpu_slices: 10,
            gpu_slice_percent: 10,
            gpu_mem_mib: 8192,
        }
    }

    fn series(rows: &[(f64, f64, f64, f64)]) -> TraceSeries {
        TraceSeries {
            samples: rows
                .iter()
                .enumerate()
                .map(|(i, &(p, e, rss, gpu))| TraceSample {
                    timestamp_ms: i as u64 * 1000,
                    cpu_p_util_pct: p,
                    cpu_e_util_pct: e,
                    mem_rss_mib: rss,
                    swap_mib: 0.0,
                    page_faults_per_s: 0.0,
                    gpu_busy_pct: gpu,
                    gpu_mem_mib: 0.0,
                })
                .collect(),
        }
    }

    fn summarize(t: &TraceSeries) -> ProfileVector {
        let cap = testbed();
        summarize_profile(t, &cap.as_allocation(), &default_quanta(&cap)).unwrap()
    }

    #[test]
    fn constant_series() {
        let p = summarize(&series(&[(50.0, 0.0, 100.0, 0.0); 5]));
        assert_eq!(p.cpu_p.max_pct, 50.0);
        assert_eq!(p.cpu_p.median_pct, 50.0);
    }

    #[test]
    fn order_statistics() {
        let p = summarize(&series(&[(10.0, 0.0, 1.0, 0.0), (90.0, 0.0, 1.0, 0.0), (50.0, 0.0, 1.0, 0.0)]));
        assert_eq!(p.cpu_p.max_pct, 90.0);
        assert_eq!(p.cpu_p.median_pct, 50.0);
    }

    #[test]
    fn five_gib_peak_rss() {
        let p = summarize(&series(&[(10.0, 0.0, 3072.0, 0.0), (10.0, 0.0, 5120.0, 0.0)]));
        assert_eq!(p.r_prof.m, 5120);
        assert_eq!(p.mem.peak_rss_mib, 5120.0);
        assert_eq!(p.mem.wss_mib, 4096.0);
        assert_eq!(p.r_min.m, 4096);
    }

    #[test]
    fn cpu_demand_in_core_units() {
        // 90% of 6 P-cores = 5.4 -> 6; 10% of 8 E-cores = 0.8 -> 1
        let p = summarize(&series(&[(90.0, 10.0, 100.0, 0.0)]));
        assert_eq!(p.r_prof.c_p, 6);
        assert_eq!(p.r_prof.c_e, 1);
        assert_eq!(p.r_min.c_p, 0);
        assert_eq!(p.r_prof.g, 0);
        assert_eq!(p.r_min.g, 0);
    }

    #[test]
    fn exact_multiple_not_bumped() {
        // 50% of 6 = 3.0 exactly
        let p = summarize(&series(&[(50.0, 0.0, 1.0, 40.0)]));
        assert_eq!(p.r_prof.c_p, 3);
        assert_eq!(p.r_prof.g, 4);
        assert_eq!(p.r_min.g, 0);
    }

    #[test]
    fn empty_trace_errors() {
        let cap = testbed();
        assert_eq!(
            summarize_profile(&TraceSeries::default(), &cap.as_allocation(), &default_quanta(&cap)),
            Err(ProfilingError::EmptyTrace)
        );
    }

    #[test]
    fn no_gpu_quantum_means_no_gpu_demand() {
        let cap = HardwareCapacity { gpu_slices: 0, ..testbed() };
        let p = summarize_profile(
            &series(&[(50.0, 0.0, 1.0, 80.0)]),
            &cap.as_allocation(),
            &default_quanta(&cap),
        )
        .unwrap();
        assert_eq!(p.r_prof.g, 0);
    }

    #[test]
    fn utilization_fraction_caps() {
        assert_eq!(utilization_fraction(2048.0, 4096.0), 0.5);
        assert_eq!(utilization_fraction(4096.0, 2048.0), 1.0);
        assert_eq!(utilization_fraction(1.0, 0.0), 0.0);
    }

    proptest! {
        #[test]
        fn shuffle_leaves_summary_unchanged(
            rows in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0, 0.0f64..20000.0, 0.0f64..100.0), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let a = summarize(&series(&rows));
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = summarize(&series(&shuffled));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn profile_invariants(
            rows in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0, 0.0f64..20000.0, 0.0f64..100.0), 1..40),
        ) {
            let p = summarize(&series(&rows));
            prop_assert!(p.cpu_p.median_pct <= p.cpu_p.max_pct);
            prop_assert!(p.cpu_e.median_pct <= p.cpu_e.max_pct);
            prop_assert!(p.gpu.median_busy_pct <= p.gpu.max_busy_pct);
            prop_assert!(p.mem.wss_mib <= p.mem.peak_rss_mib);
            prop_assert!(p.r_min.fits_within(&p.r_prof));
            // quantum rounding: r_prof >= demand and r_prof - demand < quantum
            let m = p.r_prof.m as f64;
            prop_assert!(m >= p.mem.peak_rss_mib);
            prop_assert!(m - p.mem.peak_rss_mib < 128.0 + 1.0);
        }
    }
}
