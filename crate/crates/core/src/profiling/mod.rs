//! Trace ingestion, profile summarization and synthetic data generation.

mod dataset;
mod summary;
mod synth;
mod trace;

use thiserror::Error;

pub use dataset::{
    class_of_workload, generate_dataset, make_oracle, records_from_jsonl, records_to_jsonl, reference_board,
    DatasetRecord, SyntheticDataset, UtilSnapshot, WorkloadOracle, DATASET_CLASSES,
};
pub use summary::{summarize_profile, utilization_fraction, GpuSummary, MemorySummary, ProfileVector, UtilSummary};
pub use synth::{generate_synthetic_trace, SynthSpec};
pub use trace::{ingest_trace, TraceSample, TraceSeries, TRACE_COLUMNS, TRACE_HEADER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfilingError {
    #[error("malformed trace CSV: {0}")]
    MalformedCsv(String),
    #[error("row {row}: timestamp does not increase")]
    NonMonotonicTimestamp { row: usize },
    #[error("row {row}: value of `{column}` out of range")]
    OutOfRangeValue { row: usize, column: &'static str },
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("dataset line {line}: {reason}")]
    MalformedDataset { line: usize, reason: String },
}
