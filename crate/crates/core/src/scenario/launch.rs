//! One-shot launch script stubs: one block of environment assignments per VM.

use super::{ScenarioDocument, ScenarioError};
use crate::types::AllocationVector;

/// Shell text documenting the allocation. The launch line only echoes; wire it to the
/// hypervisor's own launcher.
pub fn emit_launch_script(doc: &ScenarioDocument) -> String {
    let b = &doc.board;
    let mut s = String::new();
    s.push_str("#!/bin/sh\n");
    s.push_str(&format!("# generated by {} {}\n", doc.generator.tool, doc.generator.version));
    s.push_str(&format!(
        "# board: p_cores={} e_cores={} memory_mib={} gpu_slices={} ({}% each)\n",
        b.p_cores, b.e_cores, b.memory_mib, b.gpu_slices, b.gpu_slice_percent
    ));
    s.push_str("set -eu\n");
    for (i, vm) in doc.vms.iter().enumerate() {
        let r = &vm.allocation;
        s.push_str(&format!("\n# vm {}/{}: {}\n", i + 1, doc.vms.len(), vm.workload_class.as_str()));
        s.push_str(&format!("VM_ID={}\n", vm.vm_id));
        s.push_str(&format!("CPUS_P={} CPUS_E={} MEM_MIB={} GPU_SLICES={}\n", r.c_p, r.c_e, r.m, r.g));
        s.push_str(
            "echo launch_vm --id \"$VM_ID\" --cpus-p \"$CPUS_P\" --cpus-e \"$CPUS_E\" --mem-mib \"$MEM_MIB\" --gpu-slices \"$GPU_SLICES\"\n",
        );
    }
    s
}

fn malformed(line: usize, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::MalformedLaunchScript {
        line,
        reason: reason.into(),
    }
}

/// Reads back `(vm_id, allocation)` per block, in script order.
pub fn parse_launch_script(text: &str) -> Result<Vec<(String, AllocationVector)>, ScenarioError> {
    let mut out: Vec<(String, Option<AllocationVector>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if let Some(id) = line.strip_prefix("VM_ID=") {
            if let Some((prev, None)) = out.last() {
                return Err(malformed(n, format!("no allocation line for `{prev}`")));
            }
            out.push((id.to_string(), None));
        } else if line.starts_with("CPUS_P=") {
            let Some((_, slot @ None)) = out.last_mut() else {
                return Err(malformed(n, "allocation line without a preceding VM_ID"));
            };
            let mut vals = [None; 4];
            for tok in line.split_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| malformed(n, format!("bad assignment `{tok}`")))?;
                let idx = match k {
                    "CPUS_P" => 0,
                    "CPUS_E" => 1,
                    "MEM_MIB" => 2,
                    "GPU_SLICES" => 3,
                    _ => return Err(malformed(n, format!("unknown variable `{k}`"))),
                };
                let v: u64 = v.parse().map_err(|_| malformed(n, format!("`{k}` is not a count")))?;
                vals[idx] = Some(v);
            }
            let [Some(c_p), Some(c_e), Some(m), Some(g)] = vals else {
                return Err(malformed(n, "missing one of CPUS_P, CPUS_E, MEM_MIB, GPU_SLICES"));
            };
            *slot = Some(AllocationVector::new(c_p, c_e, m, g));
        }
    }
    out.into_iter()
        .map(|(id, r)| r.map(|r| (id.clone(), r)).ok_or_else(|| malformed(0, format!("no allocation line for `{id}`"))))
        .collect()
}
