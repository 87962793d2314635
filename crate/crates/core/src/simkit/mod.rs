//! Trace-driven evaluation: workloads, end-to-end simulation of baseline
//! and heterogeneous-timing controllers, statistics and page placement.

mod alloc;
mod fingerprint;
mod sim;
mod stats_io;
mod trace;

pub use alloc::{allocate_pages, fast_coverage, remap_trace, PageMapping};
pub use fingerprint::{fingerprint, profile_fingerprint};
pub use sim::{simulate, speedup, SimConfig, SimStats};
pub use stats_io::{read_stats_csv, write_stats_csv, RunRecord, STATS_COLUMNS, STATS_MAGIC};
pub use trace::{gen_trace, read_trace, write_trace, MemoryTrace, Op, TraceEntry, TraceKind, PAGE_BYTES, TRACE_MAGIC};
