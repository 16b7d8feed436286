use serde::{Deserialize, Serialize};

use super::ProfilingError;

/// Exact header line of a trace CSV file.
pub const TRACE_HEADER: &str =
    "timestamp_ms,cpu_p_util_pct,cpu_e_util_pct,mem_rss_mib,swap_mib,page_faults_per_s,gpu_busy_pct,gpu_mem_mib";

pub const TRACE_COLUMNS: [&str; 8] = [
    "timestamp_ms",
    "cpu_p_util_pct",
    "cpu_e_util_pct",
    "mem_rss_mib",
    "swap_mib",
    "page_faults_per_s",
    "gpu_busy_pct",
    "gpu_mem_mib",
];

/// One monitoring sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub timestamp_ms: u64,
    pub cpu_p_util_pct: f64,
    pub cpu_e_util_pct: f64,
    pub mem_rss_mib: f64,
    pub swap_mib: f64,
    pub page_faults_per_s: f64,
    pub gpu_busy_pct: f64,
    pub gpu_mem_mib: f64,
}

impl TraceSample {
    fn values(&self) -> [f64; 7] {
        [
            self.cpu_p_util_pct,
            self.cpu_e_util_pct,
            self.mem_rss_mib,
            self.swap_mib,
            self.page_faults_per_s,
            self.gpu_busy_pct,
            self.gpu_mem_mib,
        ]
    }

    /// Name of the first column that violates its range, if any.
    pub fn out_of_range_column(&self) -> Option<&'static str> {
        let is_pct = [true, true, false, false, false, true, false];
        self.values()
            .iter()
            .zip(is_pct)
            .zip(&TRACE_COLUMNS[1..])
            .find(|((&v, pct), _)| !v.is_finite() || v < 0.0 || (*pct && v > 100.0))
            .map(|(_, &name)| name)
    }
}

/// Time-ordered samples of one VM's resource usage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    pub samples: Vec<TraceSample>,
}

impl TraceSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Writes the series in the trace CSV format.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.samples.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.timestamp_ms,
                s.cpu_p_util_pct,
                s.cpu_e_util_pct,
                s.mem_rss_mib,
                s.swap_mib,
                s.page_faults_per_s,
                s.gpu_busy_pct,
                s.gpu_mem_mib
            ));
        }
        out
    }
}

/// Parses a trace CSV. Rows are numbered from 1 (the first line after the header).
pub fn ingest_trace(csv_text: &str) -> Result<TraceSeries, ProfilingError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| ProfilingError::MalformedCsv(e.to_string()))?;
    if header.iter().ne(TRACE_COLUMNS.iter().copied()) {
        return Err(ProfilingError::MalformedCsv(format!(
            "expected header `{TRACE_HEADER}`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut samples: Vec<TraceSample> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| ProfilingError::MalformedCsv(format!("row {row}: {e}")))?;
        let timestamp_ms: u64 = record[0].parse().map_err(|_| {
            ProfilingError::MalformedCsv(format!("row {row}: timestamp_ms `{}` is not an integer", &record[0]))
        })?;
        let mut vals = [0.0f64; 7];
        for (j, v) in vals.iter_mut().enumerate() {
            let raw = &record[j + 1];
            *v = raw.parse().map_err(|_| {
                ProfilingError::MalformedCsv(format!(
                    "row {row}: {} `{raw}` is not a number",
                    TRACE_COLUMNS[j + 1]
                ))
            })?;
        }
        let sample = TraceSample {
            timestamp_ms,
            cpu_p_util_pct: vals[0],
            cpu_e_util_pct: vals[1],
            mem_rss_mib: vals[2],
            swap_mib: vals[3],
            page_faults_per_s: vals[4],
            gpu_busy_pct: vals[5],
            gpu_mem_mib: vals[6],
        };
        if let Some(prev) = samples.last() {
            if sample.timestamp_ms <= prev.timestamp_ms {
                return Err(ProfilingError::NonMonotonicTimestamp { row });
            }
        }
        if let Some(column) = sample.out_of_range_column() {
            return Err(ProfilingError::OutOfRangeValue { row, column });
        }
        samples.push(sample);
    }
    Ok(TraceSeries { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(rows: &[&str]) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn three_valid_rows() {
        let t = ingest_trace(&csv(&[
            "0,10,5,1024,0,0,0,0",
            "1000,90,5,2048,0,3,20,512",
            "2000,50,5,1536,0,0,0,0",
        ]))
        .unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.samples[1].cpu_p_util_pct, 90.0);
    }

    #[test]
    fn percent_above_hundred_rejected() {
        let err = ingest_trace(&csv(&["0,10,5,1024,0,0,0,0", "1000,120,5,1024,0,0,0,0"])).unwrap_err();
        assert_eq!(err, ProfilingError::OutOfRangeValue { row: 2, column: "cpu_p_util_pct" });
    }

    #[test]
    fn negative_size_rejected() {
        let err = ingest_trace(&csv(&["0,10,5,-1,0,0,0,0"])).unwrap_err();
        assert_eq!(err, ProfilingError::OutOfRangeValue { row: 1, column: "mem_rss_mib" });
    }

    #[test]
    fn header_only_gives_empty_series() {
        assert!(ingest_trace(&csv(&[])).unwrap().is_empty());
    }

    #[test]
    fn timestamps_must_increase() {
        let err = ingest_trace(&csv(&["5,1,1,1,0,0,0,0", "5,1,1,1,0,0,0,0"])).unwrap_err();
        assert_eq!(err, ProfilingError::NonMonotonicTimestamp { row: 2 });
    }

    #[test]
    fn wrong_header_or_shape_is_malformed() {
        assert!(matches!(
            ingest_trace("ts,cpu\n1,2\n").unwrap_err(),
            ProfilingError::MalformedCsv(_)
        ));
        assert!(matches!(
            ingest_trace(&csv(&["0,1,1"])).unwrap_err(),
            ProfilingError::MalformedCsv(_)
        ));
        assert!(matches!(
            ingest_trace(&csv(&["0,x,1,1,0,0,0,0"])).unwrap_err(),
            ProfilingError::MalformedCsv(_)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let text = csv(&["0,10.5,5,1024,0,0,0,0", "1000,90,5.25,2048,16,3,20,512"]);
        let t = ingest_trace(&text).unwrap();
        assert_eq!(t.to_csv(), text);
    }
}
