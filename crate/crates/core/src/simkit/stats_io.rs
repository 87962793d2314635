//! Stats CSV: one row per simulation run.

use std::io::{BufRead, Write};

use super::sim::SimStats;
use crate::error::{Error, Result};

pub const STATS_MAGIC: &str = "#flydram-stats v1";
pub const STATS_COLUMNS: &str = "label,mode,config_fingerprint,trace_fingerprint,profile_fingerprint,requests_served,\
avg_read_latency_cyc,p99_read_latency_cyc,row_hit_rate,total_cycles,injected_bit_flips,ecc_corrected,regionmap_bytes";

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub mode: String,
    pub config_fingerprint: String,
    pub profile_fingerprint: String,
    pub stats: SimStats,
}

fn check_field(s: &str) -> Result<&str> {
    if s.contains([',', '\n', '\r']) {
        return Err(Error::param(format!("field `{s}` may not contain commas or newlines")));
    }
    Ok(s)
}

pub fn write_stats_csv<W: Write>(records: &[RunRecord], mut out: W) -> Result<()> {
    writeln!(out, "{STATS_MAGIC}")?;
    writeln!(out, "{STATS_COLUMNS}")?;
    for r in records {
        let s = &r.stats;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            check_field(&r.label)?,
            check_field(&r.mode)?,
            check_field(&r.config_fingerprint)?,
            check_field(&s.trace_fingerprint)?,
            check_field(&r.profile_fingerprint)?,
            s.requests_served,
            s.avg_read_latency_cyc,
            s.p99_read_latency_cyc,
            s.row_hit_rate,
            s.total_cycles,
            s.injected_bit_flips,
            s.ecc_corrected,
            s.regionmap_bytes
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_stats_csv<R: BufRead>(source: R) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    let mut saw_columns = false;
    for (i, text) in source.lines().enumerate() {
        let line_no = i + 1;
        let text = text?;
        let text = text.trim_end();
        if line_no == 1 {
            if text != STATS_MAGIC {
                return Err(Error::format(1, format!("expected `{STATS_MAGIC}` header")));
            }
            continue;
        }
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if !saw_columns {
            if text != STATS_COLUMNS {
                return Err(Error::format(line_no, "stats column header does not match this version"));
            }
            saw_columns = true;
            continue;
        }
        let f: Vec<&str> = text.split(',').collect();
        if f.len() != 13 {
            return Err(Error::format(line_no, format!("expected 13 fields, found {}", f.len())));
        }
        fn num<T: std::str::FromStr>(line: usize, name: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::format(line, format!("invalid {name} `{v}`")))
        }
        let stats = SimStats {
            trace_fingerprint: f[3].to_string(),
            requests_served: num(line_no, "requests_served", f[5])?,
            avg_read_latency_cyc: num(line_no, "avg_read_latency_cyc", f[6])?,
            p99_read_latency_cyc: num(line_no, "p99_read_latency_cyc", f[7])?,
            row_hit_rate: num(line_no, "row_hit_rate", f[8])?,
            total_cycles: num(line_no, "total_cycles", f[9])?,
            injected_bit_flips: num(line_no, "injected_bit_flips", f[10])?,
            ecc_corrected: num(line_no, "ecc_corrected", f[11])?,
            regionmap_bytes: num(line_no, "regionmap_bytes", f[12])?,
        };
        if !(0.0..=1.0).contains(&stats.row_hit_rate) {
            return Err(Error::format(line_no, "row_hit_rate outside [0, 1]"));
        }
        out.push(RunRecord {
            label: f[0].to_string(),
            mode: f[1].to_string(),
            config_fingerprint: f[2].to_string(),
            profile_fingerprint: f[4].to_string(),
            stats,
        });
    }
    if !saw_columns {
        return Err(Error::format(1, "missing column header"));
    }
    Ok(out)
}
