use super::AllocError;
use crate::board::{HardwareCapacity, Quanta};
use crate::objective::VmSpec;
use crate::types::{AllocationVector, ResourceKind};

/// Divides every resource evenly, in whole quanta. Leftover quanta go one at a time to
/// VMs in index order.
pub fn equal_split(specs: &[VmSpec], cap: &HardwareCapacity, quanta: &Quanta) -> Vec<AllocationVector> {
    let n = specs.len();
    let mut out = vec![AllocationVector::ZERO; n];
    if n == 0 {
        return out;
    }
    for kind in ResourceKind::ALL {
        let Some(step) = quanta.step(kind) else { continue };
        let units = cap.total(kind) / step;
        let each = units / n as u64;
        let extra = (units % n as u64) as usize;
        for (i, a) in out.iter_mut().enumerate() {
            let q = each + u64::from(i < extra);
            a.set(kind, q * step);
        }
    }
    out
}

/// Splits each resource in proportion to profiled peak demand using largest remainders,
/// then lifts VMs below their profiled floor by taking quanta from the VM with the most
/// room above its own floor.
pub fn proportional_split(
    specs: &[VmSpec],
    cap: &HardwareCapacity,
    quanta: &Quanta,
) -> Result<Vec<AllocationVector>, AllocError> {
    let n = specs.len();
    if n == 0 {
        return Err(AllocError::NoVms);
    }
    let mut out = vec![AllocationVector::ZERO; n];
    for kind in ResourceKind::ALL {
        let Some(step) = quanta.step(kind) else { continue };
        let units = cap.total(kind) / step;
        if units == 0 {
            continue;
        }
        let demand: Vec<f64> = specs.iter().map(|s| s.profile.demand(kind).max(0.0)).collect();
        let total: f64 = demand.iter().sum();
        if total <= 0.0 {
            return Err(AllocError::ZeroTotalDemand(kind));
        }
        let exact: Vec<f64> = demand.iter().map(|d| d / total * units as f64).collect();
        let mut share: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
        let mut left = units - share.iter().sum::<u64>();
        let mut by_remainder: Vec<usize> = (0..n).collect();
        by_remainder.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra)
        });
        for &i in by_remainder.iter().cycle() {
            if left == 0 {
                break;
            }
            share[i] += 1;
            left -= 1;
        }

        let floor: Vec<u64> = specs
            .iter()
            .map(|s| s.profile.r_min.get(kind).div_ceil(step))
            .collect();
        for i in 0..n {
            while share[i] < floor[i] {
                let donor = (0..n)
                    .filter(|&j| j != i && share[j] > floor[j])
                    .max_by(|&a, &b| (share[a] - floor[a]).cmp(&(share[b] - floor[b])).then(b.cmp(&a)));
                let Some(j) = donor else { break };
                share[j] -= 1;
                share[i] += 1;
            }
        }
        for (a, q) in out.iter_mut().zip(share) {
            a.set(kind, q * step);
        }
    }
    Ok(out)
}
