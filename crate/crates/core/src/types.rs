//! Resource kinds, allocation vectors and workload classes shared by every module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One allocatable resource dimension of the board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    PCore,
    ECore,
    MemoryMib,
    GpuSlice,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 4] = [
        ResourceKind::PCore,
        ResourceKind::ECore,
        ResourceKind::MemoryMib,
        ResourceKind::GpuSlice,
    ];

    pub fn index(self) -> usize {
        match self {
            ResourceKind::PCore => 0,
            ResourceKind::ECore => 1,
            ResourceKind::MemoryMib => 2,
            ResourceKind::GpuSlice => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ResourceKind::PCore => "p_core",
            ResourceKind::ECore => "e_core",
            ResourceKind::MemoryMib => "memory_mib",
            ResourceKind::GpuSlice => "gpu_slice",
        }
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ResourceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown resource kind `{s}`"))
    }
}

/// One VM's resource grant: P-cores, E-cores, memory in MiB and GPU slices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AllocationVector {
    pub c_p: u64,
    pub c_e: u64,
    pub m: u64,
    pub g: u64,
}

impl AllocationVector {
    pub const ZERO: AllocationVector = AllocationVector { c_p: 0, c_e: 0, m: 0, g: 0 };

    pub fn new(c_p: u64, c_e: u64, m: u64, g: u64) -> Self {
        Self { c_p, c_e, m, g }
    }

    pub fn from_array(a: [u64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [u64; 4] {
        [self.c_p, self.c_e, self.m, self.g]
    }

    pub fn get(&self, kind: ResourceKind) -> u64 {
        self.to_array()[kind.index()]
    }

    pub fn set(&mut self, kind: ResourceKind, value: u64) {
        match kind {
            ResourceKind::PCore => self.c_p = value,
            ResourceKind::ECore => self.c_e = value,
            ResourceKind::MemoryMib => self.m = value,
            ResourceKind::GpuSlice => self.g = value,
        }
    }

    pub fn with(mut self, kind: ResourceKind, value: u64) -> Self {
        self.set(kind, value);
        self
    }

    /// Componentwise `self <= other`.
    pub fn fits_within(&self, other: &AllocationVector) -> bool {
        self.c_p <= other.c_p && self.c_e <= other.c_e && self.m <= other.m && self.g <= other.g
    }

    pub fn saturating_add(&self, other: &AllocationVector) -> AllocationVector {
        AllocationVector::new(
            self.c_p.saturating_add(other.c_p),
            self.c_e.saturating_add(other.c_e),
            self.m.saturating_add(other.m),
            self.g.saturating_add(other.g),
        )
    }

    pub fn saturating_sub(&self, other: &AllocationVector) -> AllocationVector {
        AllocationVector::new(
            self.c_p.saturating_sub(other.c_p),
            self.c_e.saturating_sub(other.c_e),
            self.m.saturating_sub(other.m),
            self.g.saturating_sub(other.g),
        )
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a AllocationVector>) -> AllocationVector {
        items
            .into_iter()
            .fold(AllocationVector::ZERO, |acc, a| acc.saturating_add(a))
    }
}

impl fmt::Display for AllocationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(c_p={}, c_e={}, m={} MiB, g={})",
            self.c_p, self.c_e, self.m, self.g
        )
    }
}

/// Workload classes with QoS templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadClass {
    Gaming,
    AiInference,
    WebMicroservice,
    RtosControl,
}

impl WorkloadClass {
    pub const ALL: [WorkloadClass; 4] = [
        WorkloadClass::Gaming,
        WorkloadClass::AiInference,
        WorkloadClass::WebMicroservice,
        WorkloadClass::RtosControl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WorkloadClass::Gaming => "gaming",
            WorkloadClass::AiInference => "ai_inference",
            WorkloadClass::WebMicroservice => "web_microservice",
            WorkloadClass::RtosControl => "rtos_control",
        }
    }

    pub fn index(self) -> usize {
        match self {
            WorkloadClass::Gaming => 0,
            WorkloadClass::AiInference => 1,
            WorkloadClass::WebMicroservice => 2,
            WorkloadClass::RtosControl => 3,
        }
    }
}

impl fmt::Display for WorkloadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WorkloadClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "gaming" => Ok(WorkloadClass::Gaming),
            "ai_inference" | "ai" => Ok(WorkloadClass::AiInference),
            "web_microservice" | "web" => Ok(WorkloadClass::WebMicroservice),
            "rtos_control" | "rtos" => Ok(WorkloadClass::RtosControl),
            _ => Err(format!("unknown workload class `{s}`")),
        }
    }
}

/// Identifiers end up in shell scripts and file names, so they are kept to a safe alphabet.
pub fn is_valid_vm_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}
