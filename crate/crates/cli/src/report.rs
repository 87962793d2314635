use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flydram::profiler::{read_ber_csv, BerRow, BER_MAGIC};
use flydram::simkit::{read_stats_csv, speedup, RunRecord, STATS_MAGIC};

use crate::args::ReportArgs;
use crate::{create, open};

pub const SUMMARY_MAGIC: &str = "#flydram-summary v1";
pub const SPEEDUP_MAGIC: &str = "#flydram-speedup v1";
pub const QUANTILES_MAGIC: &str = "#flydram-ber-quantiles v1";

/// Files named directly, then `*.csv` files of named directories in name order.
fn expand(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in inputs {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .with_context(|| format!("cannot list {}", path.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            found.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"));
            found.sort();
            out.extend(found);
        } else {
            out.push(path.clone());
        }
    }
    Ok(out)
}

fn first_line(path: &Path) -> Result<String> {
    let mut line = String::new();
    open(path)?.read_line(&mut line)?;
    Ok(line.trim_end().to_string())
}

/// Linear interpolation between closest ranks of sorted `v`.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Baseline record sharing the run's trace and profile.
fn partner<'a>(records: &'a [RunRecord], r: &RunRecord) -> Option<&'a RunRecord> {
    records.iter().find(|b| {
        b.mode == "baseline"
            && b.stats.trace_fingerprint == r.stats.trace_fingerprint
            && b.profile_fingerprint == r.profile_fingerprint
    })
}

pub(crate) fn report(a: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    let mut ber_rows: Vec<BerRow> = Vec::new();
    for path in expand(&a.inputs)? {
        let header = first_line(&path)?;
        if header == STATS_MAGIC {
            records.extend(read_stats_csv(open(&path)?).with_context(|| format!("reading {}", path.display()))?);
        } else if header == BER_MAGIC {
            ber_rows.extend(read_ber_csv(open(&path)?).with_context(|| format!("reading {}", path.display()))?.rows);
        } else {
            return Err(flydram::Error::format(1, format!("unrecognized or stale schema header `{header}`")))
                .with_context(|| format!("reading {}", path.display()));
        }
    }
    if records.is_empty() && ber_rows.is_empty() {
        bail!("no stats or BER rows in the inputs");
    }
    write_summary(&records, &a.out_dir.join("summary.csv"))?;
    write_speedups(&records, &a.out_dir.join("speedup.csv"))?;
    write_quantiles(&ber_rows, &a.out_dir.join("ber_quantiles.csv"))?;
    println!("{} runs and {} BER rows summarized in {}", records.len(), ber_rows.len(), a.out_dir.display());
    Ok(())
}

fn write_summary(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut groups: BTreeMap<(&str, &str, &str), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((&r.label, &r.mode, &r.config_fingerprint)).or_default().push(r);
    }
    let mut w = create(path)?;
    writeln!(w, "{SUMMARY_MAGIC}")?;
    writeln!(
        w,
        "label,mode,config_fingerprint,runs,requests_served,avg_read_latency_cyc,p99_read_latency_cyc,row_hit_rate,\
total_cycles,injected_bit_flips,ecc_corrected,regionmap_bytes,speedup"
    )?;
    for ((label, mode, config), runs) in &groups {
        let m = |f: fn(&RunRecord) -> f64| mean(runs.iter().map(|r| f(r)));
        let speedups: Option<Vec<f64>> = runs
            .iter()
            .map(|r| partner(records, r).map(|b| speedup(&b.stats, &r.stats)).transpose())
            .collect::<flydram::Result<_>>()?;
        let speedup = match speedups {
            Some(s) if !s.is_empty() => mean(s.into_iter()).to_string(),
            _ => String::new(),
        };
        writeln!(
            w,
            "{label},{mode},{config},{},{},{},{},{},{},{},{},{},{speedup}",
            runs.len(),
            m(|r| r.stats.requests_served as f64),
            m(|r| r.stats.avg_read_latency_cyc),
            m(|r| r.stats.p99_read_latency_cyc as f64),
            m(|r| r.stats.row_hit_rate),
            m(|r| r.stats.total_cycles as f64),
            m(|r| r.stats.injected_bit_flips as f64),
            m(|r| r.stats.ecc_corrected as f64),
            m(|r| r.stats.regionmap_bytes as f64),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One bar per non-baseline run with a baseline partner.
fn write_speedups(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{SPEEDUP_MAGIC}")?;
    writeln!(w, "profile_fingerprint,trace_fingerprint,label,mode,baseline_cycles,cycles,speedup")?;
    for r in records.iter().filter(|r| r.mode != "baseline") {
        if let Some(b) = partner(records, r) {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.profile_fingerprint,
                r.stats.trace_fingerprint,
                r.label,
                r.mode,
                b.stats.total_cycles,
                r.stats.total_cycles,
                speedup(&b.stats, &r.stats)?
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Box-plot quantiles of per-row BER at each (parameter, value, pattern).
fn write_quantiles(rows: &[BerRow], path: &Path) -> Result<()> {
    let mut groups: BTreeMap<(String, u32, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.param.to_string(), r.value.ps(), r.pattern.to_string())).or_default().push(r.ber());
    }
    let mut w = create(path)?;
    writeln!(w, "{QUANTILES_MAGIC}")?;
    writeln!(w, "param,value_ns,pattern,samples,min,q1,median,q3,max")?;
    for ((param, ps, pattern), mut v) in groups {
        v.sort_by(f64::total_cmp);
        writeln!(
            w,
            "{param},{},{pattern},{},{},{},{},{},{}",
            flydram::Latency::from_ps(ps),
            v.len(),
            v[0],
            quantile(&v, 0.25),
            quantile(&v, 0.5),
            quantile(&v, 0.75),
            v[v.len() - 1]
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&[0.0, 1.0], 0.25), 0.25);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
    }
}
