use sapenum_core::engine::WidthStats;
use serde::Serialize;

/// Machine-readable record of one enumeration run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub max_width: usize,
    pub max_degree: u32,
    pub moduli: Vec<String>,
    pub threads: usize,
    pub pruning: bool,
    pub kink_simplification: bool,
    pub checkpoint: Option<String>,
    pub wall_time_seconds: f64,
    pub peak_rss_kib: Option<u64>,
    pub widths: Vec<WidthRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct WidthRecord {
    pub width: usize,
    pub max_length: usize,
    pub peak_entries: usize,
    pub peak_terms: usize,
    pub milliseconds: u64,
    pub resumed_from_column: Option<usize>,
}

impl From<&WidthStats> for WidthRecord {
    fn from(s: &WidthStats) -> Self {
        WidthRecord {
            width: s.width,
            max_length: s.max_length,
            peak_entries: s.peak_entries,
            peak_terms: s.peak_terms,
            milliseconds: s.millis,
            resumed_from_column: s.resumed_from_column,
        }
    }
}

/// High-water resident set size from `/proc`, where available.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}
