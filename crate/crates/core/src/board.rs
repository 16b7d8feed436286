//! Board description: hardware capacities and allocation quanta.
//!
//! The board file is a small XML document:
//!
//! ```xml
//! <board>
//!   <cpu>
//!     <pcores>6</pcores>
//!     <ecores>8</ecores>
//!   </cpu>
//!   <memory mib="65536"/>
//!   <gpu slices="10" slice_percent="10" mem_mib="8192"/>
//! </board>
//! ```
//!
//! `<gpu>` is optional; unknown elements and attributes are ignored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AllocationVector, ResourceKind};

pub const DEFAULT_SLICE_PERCENT: u64 = 10;
pub const DEFAULT_MEMORY_QUANTUM_MIB: u64 = 128;

#[derive(Debug, Error, PartialEq)]
pub enum BoardError {
    #[error("malformed board XML: {0}")]
    MalformedXml(String),
    #[error("board XML is missing required field `{0}`")]
    MissingField(&'static str),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: &'static str, reason: String },
}

/// Total allocatable resources of the board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareCapacity {
    pub p_cores: u64,
    pub e_cores: u64,
    pub memory_mib: u64,
    pub gpu_slices: u64,
    /// Share of the GPU carried by one SR-IOV slice, in percent.
    pub gpu_slice_percent: u64,
    pub gpu_mem_mib: u64,
}

impl HardwareCapacity {
    pub fn validate(&self) -> Result<(), BoardError> {
        if self.p_cores + self.e_cores < 1 {
            return Err(BoardError::InvalidValue {
                field: "cpu",
                reason: "board needs at least one core".into(),
            });
        }
        if self.gpu_slices > 0 && self.gpu_slice_percent == 0 {
            return Err(BoardError::InvalidValue {
                field: "gpu.slice_percent",
                reason: "slice percent must be positive".into(),
            });
        }
        if self.gpu_slices.saturating_mul(self.gpu_slice_percent) > 100 {
            return Err(BoardError::InvalidValue {
                field: "gpu.slices",
                reason: format!(
                    "{} slices of {}% exceed the whole GPU",
                    self.gpu_slices, self.gpu_slice_percent
                ),
            });
        }
        Ok(())
    }

    /// Capacities as a resource vector for constraint checks.
    pub fn as_allocation(&self) -> AllocationVector {
        AllocationVector::new(self.p_cores, self.e_cores, self.memory_mib, self.gpu_slices)
    }

    pub fn total(&self, kind: ResourceKind) -> u64 {
        self.as_allocation().get(kind)
    }

    /// Serializes to the canonical board XML accepted by [`parse_board_config`].
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        out.push_str("<board>\n");
        out.push_str("  <cpu>\n");
        out.push_str(&format!("    <pcores>{}</pcores>\n", self.p_cores));
        out.push_str(&format!("    <ecores>{}</ecores>\n", self.e_cores));
        out.push_str("  </cpu>\n");
        out.push_str(&format!("  <memory mib=\"{}\"/>\n", self.memory_mib));
        if self.gpu_slices > 0 || self.gpu_mem_mib > 0 || self.gpu_slice_percent != DEFAULT_SLICE_PERCENT {
            out.push_str(&format!(
                "  <gpu slices=\"{}\" slice_percent=\"{}\" mem_mib=\"{}\"/>\n",
                self.gpu_slices, self.gpu_slice_percent, self.gpu_mem_mib
            ));
        }
        out.push_str("</board>\n");
        out
    }
}

fn parse_count(field: &'static str, raw: &str) -> Result<u64, BoardError> {
    let raw = raw.trim();
    let v: i64 = raw.parse().map_err(|_| BoardError::InvalidValue {
        field,
        reason: format!("`{raw}` is not an integer"),
    })?;
    if v < 0 {
        return Err(BoardError::InvalidValue {
            field,
            reason: format!("{v} is negative"),
        });
    }
    Ok(v as u64)
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.has_tag_name(name))
}

/// Parses board XML into capacities.
pub fn parse_board_config(xml_text: &str) -> Result<HardwareCapacity, BoardError> {
    let doc = roxmltree::Document::parse(xml_text).map_err(|e| BoardError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("board") {
        return Err(BoardError::MissingField("board"));
    }

    let cpu = child(root, "cpu").ok_or(BoardError::MissingField("cpu"))?;
    let pcores = child(cpu, "pcores").ok_or(BoardError::MissingField("cpu.pcores"))?;
    let ecores = child(cpu, "ecores").ok_or(BoardError::MissingField("cpu.ecores"))?;
    let p_cores = parse_count("cpu.pcores", pcores.text().unwrap_or(""))?;
    let e_cores = parse_count("cpu.ecores", ecores.text().unwrap_or(""))?;

    let memory = child(root, "memory").ok_or(BoardError::MissingField("memory"))?;
    let memory_mib = parse_count(
        "memory.mib",
        memory.attribute("mib").ok_or(BoardError::MissingField("memory.mib"))?,
    )?;

    let (gpu_slices, gpu_slice_percent, gpu_mem_mib) = match child(root, "gpu") {
        None => (0, DEFAULT_SLICE_PERCENT, 0),
        Some(gpu) => {
            let slices = parse_count(
                "gpu.slices",
                gpu.attribute("slices").ok_or(BoardError::MissingField("gpu.slices"))?,
            )?;
            let percent = match gpu.attribute("slice_percent") {
                Some(p) => parse_count("gpu.slice_percent", p)?,
                None => DEFAULT_SLICE_PERCENT,
            };
            let mem = match gpu.attribute("mem_mib") {
                Some(m) => parse_count("gpu.mem_mib", m)?,
                None => 0,
            };
            (slices, percent, mem)
        }
    };

    let cap = HardwareCapacity {
        p_cores,
        e_cores,
        memory_mib,
        gpu_slices,
        gpu_slice_percent,
        gpu_mem_mib,
    };
    cap.validate()?;
    Ok(cap)
}

/// Smallest allocatable step of one resource, in its native unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceQuantum {
    pub resource_kind: ResourceKind,
    pub step: u64,
}

/// The set of quanta in effect for a board. Resources without a quantum cannot be allocated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quanta(pub Vec<ResourceQuantum>);

impl Quanta {
    pub fn step(&self, kind: ResourceKind) -> Option<u64> {
        self.0.iter().find(|q| q.resource_kind == kind).map(|q| q.step)
    }

    /// Rounds `amount` up to the next multiple of the resource's step.
    pub fn round_up(&self, kind: ResourceKind, amount: u64) -> u64 {
        match self.step(kind) {
            Some(step) => amount.div_ceil(step) * step,
            None => amount,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &ResourceQuantum> {
        self.0.iter()
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Default quanta: 1 core, 128 MiB of memory and one GPU slice.
///
/// The memory step must divide total memory; boards whose memory is not a multiple of
/// 128 MiB fall back to the greatest common divisor.
pub fn default_quanta(cap: &HardwareCapacity) -> Quanta {
    let mem_step = if cap.memory_mib == 0 || cap.memory_mib.is_multiple_of(DEFAULT_MEMORY_QUANTUM_MIB) {
        DEFAULT_MEMORY_QUANTUM_MIB
    } else {
        gcd(DEFAULT_MEMORY_QUANTUM_MIB, cap.memory_mib)
    };
    let mut steps = vec![
        ResourceQuantum { resource_kind: ResourceKind::PCore, step: 1 },
        ResourceQuantum { resource_kind: ResourceKind::ECore, step: 1 },
        ResourceQuantum { resource_kind: ResourceKind::MemoryMib, step: mem_step },
    ];
    if cap.gpu_slices > 0 {
        steps.push(ResourceQuantum { resource_kind: ResourceKind::GpuSlice, step: 1 });
    }
    Quanta(steps)
}
