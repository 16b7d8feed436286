//! Deterministic synthetic monitoring traces shaped after each workload class.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trace::{TraceSample, TraceSeries};
use crate::types::WorkloadClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub class: WorkloadClass,
    /// Workload magnitude; memory footprints scale linearly with it.
    pub size: f64,
    pub samples: usize,
    pub interval_ms: u64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(class: WorkloadClass, size: f64, seed: u64) -> Self {
        Self {
            class,
            size,
            samples: 300,
            interval_ms: 1000,
            seed,
        }
    }
}

/// Per-class shape: (cpu_p base, cpu_e base, rss MiB per unit size, gpu busy base,
/// vram MiB per unit size).
fn class_shape(class: WorkloadClass) -> (f64, f64, f64, f64, f64) {
    match class {
        WorkloadClass::Gaming => (55.0, 12.0, 4096.0, 80.0, 1600.0),
        WorkloadClass::AiInference => (60.0, 30.0, 9216.0, 55.0, 4096.0),
        WorkloadClass::WebMicroservice => (25.0, 20.0, 5120.0, 8.0, 512.0),
        WorkloadClass::RtosControl => (30.0, 0.0, 256.0, 0.0, 0.0),
    }
}

/// Generates a trace for `spec`; the same spec always yields the same trace.
///
/// The random stream does not depend on `size`, so memory peaks grow linearly with it.
pub fn generate_synthetic_trace(spec: &SynthSpec) -> TraceSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (spec.class.index() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let (p_base, e_base, rss_per, gpu_base, vram_per) = class_shape(spec.class);
    let size = spec.size.max(0.0);
    let n = spec.samples.max(1);
    let warmup = (n / 10).max(1) as f64;

    let samples = (0..n)
        .map(|i| {
            let noise_p: f64 = rng.gen_range(-1.0..1.0);
            let noise_e: f64 = rng.gen_range(-1.0..1.0);
            let noise_m: f64 = rng.gen_range(0.0..1.0);
            let noise_g: f64 = rng.gen_range(-1.0..1.0);
            let burst: f64 = rng.gen_range(0.0..1.0);
            let fault: f64 = rng.gen_range(0.0..1.0);

            // memory ramps up during warm-up, then hovers with occasional excursions
            let ramp = ((i as f64 + 1.0) / warmup).min(1.0);
            let excursion = if noise_m > 0.95 { 1.0 } else { 0.85 + 0.1 * noise_m };
            let rss = rss_per * size * ramp * excursion;

            let (p, e, g) = match spec.class {
                WorkloadClass::WebMicroservice => {
                    let spike = if burst > 0.9 { 60.0 } else { 0.0 };
                    (p_base + spike + 8.0 * noise_p, e_base + 0.5 * spike + 5.0 * noise_e, gpu_base + 4.0 * noise_g)
                }
                WorkloadClass::Gaming => (p_base + 10.0 * noise_p, e_base + 4.0 * noise_e, gpu_base + 8.0 * noise_g),
                WorkloadClass::AiInference => {
                    let decode = if burst > 0.7 { 20.0 } else { 0.0 };
                    (p_base + decode + 8.0 * noise_p, e_base + 6.0 * noise_e, gpu_base + decode + 6.0 * noise_g)
                }
                WorkloadClass::RtosControl => (p_base + 3.0 * noise_p, 0.0, 0.0),
            };
            let gpu_active = gpu_base > 0.0;
            TraceSample {
                timestamp_ms: i as u64 * spec.interval_ms.max(1),
                cpu_p_util_pct: p.clamp(0.0, 100.0),
                cpu_e_util_pct: e.clamp(0.0, 100.0),
                mem_rss_mib: rss.max(0.0),
                swap_mib: 0.0,
                page_faults_per_s: if fault > 0.98 { 50.0 * fault } else { 0.0 },
                gpu_busy_pct: if gpu_active { g.clamp(0.0, 100.0) } else { 0.0 },
                gpu_mem_mib: if gpu_active { vram_per * size * ramp } else { 0.0 },
            }
        })
        .collect();
    TraceSeries { samples }
}
