//! Profile CSV exchange format.
//!
//! ```text
//! #flydram-profile v1
//! #geometry channels=2 ranks=1 banks=8 rows=16384 cachelines=128 bytes=64
//! #params pattern_penalty_ns=0.500 jitter_sigma_ns=0 seed=1
//! channel,rank,bank,row,cacheline,min_trcd_ns,min_trp_ns,min_tras_ns
//! 0,0,0,0,0,7.500,7.500,18.000
//! ```
//!
//! Row thresholds repeat on every line of the row and must agree. Weak bits
//! travel in a companion file headed `#flydram-weakbits v1` with columns
//! `channel,rank,bank,row,cacheline,bit_index,extra_margin_ns`.

use std::io::{BufRead, Write};

use super::profile::{LatencyProfile, WeakBit};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Location};
use crate::units::Latency;

pub const PROFILE_MAGIC: &str = "#flydram-profile v1";
pub const WEAK_MAGIC: &str = "#flydram-weakbits v1";
const PROFILE_COLUMNS: &str = "channel,rank,bank,row,cacheline,min_trcd_ns,min_trp_ns,min_tras_ns";
const WEAK_COLUMNS: &str = "channel,rank,bank,row,cacheline,bit_index,extra_margin_ns";

pub fn export_profile<W: Write>(profile: &LatencyProfile, mut out: W) -> Result<()> {
    let g = profile.geometry();
    writeln!(out, "{PROFILE_MAGIC}")?;
    writeln!(out, "{}", g.directive())?;
    writeln!(
        out,
        "#params pattern_penalty_ns={} jitter_sigma_ns={} seed={}",
        profile.pattern_penalty(),
        profile.jitter_sigma_ns(),
        profile.seed()
    )?;
    writeln!(out, "{PROFILE_COLUMNS}")?;
    for line in 0..g.total_lines() {
        let l = g.line_location(line);
        let row = g.row_index(&l);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            l.channel,
            l.rank,
            l.bank,
            l.row,
            l.cacheline,
            profile.line_trcd_at(line),
            profile.row_trp_at(row),
            profile.row_tras_at(row)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_weak_bits<W: Write>(profile: &LatencyProfile, mut out: W) -> Result<()> {
    let g = profile.geometry();
    writeln!(out, "{WEAK_MAGIC}")?;
    writeln!(out, "{WEAK_COLUMNS}")?;
    for w in profile.all_weak_bits() {
        let l = g.line_location(w.line as u64);
        writeln!(out, "{},{},{},{},{},{},{}", l.channel, l.rank, l.bank, l.row, l.cacheline, w.bit, w.margin)?;
    }
    out.flush()?;
    Ok(())
}

struct Header {
    geometry: Option<Geometry>,
    penalty: Latency,
    jitter: f64,
    seed: u64,
}

fn parse_kv(line_no: usize, body: &str) -> Result<Vec<(&str, &str)>> {
    body.split_whitespace()
        .map(|kv| kv.split_once('=').ok_or_else(|| Error::format(line_no, format!("expected key=value, found `{kv}`"))))
        .collect()
}

fn parse_num<T: std::str::FromStr>(line_no: usize, what: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::format(line_no, format!("invalid {what} `{s}`")))
}

fn parse_latency(line_no: usize, what: &str, s: &str) -> Result<Latency> {
    let l: Latency = s.parse().map_err(|e: Error| Error::format(line_no, format!("{what}: {e}")))?;
    Ok(l)
}

fn parse_threshold(line_no: usize, what: &str, s: &str) -> Result<u16> {
    let l = parse_latency(line_no, what, s)?;
    if l == Latency::ZERO {
        return Err(Error::format(line_no, format!("{what} must be positive")));
    }
    u16::try_from(l.ps()).map_err(|_| Error::format(line_no, format!("{what} {l} exceeds 65.535 ns")))
}

fn apply_directive(header: &mut Header, line_no: usize, text: &str) -> Result<()> {
    if let Some(body) = text.strip_prefix("#geometry") {
        let mut g = Geometry {
            channels: 0,
            ranks_per_channel: 0,
            banks_per_rank: 0,
            rows_per_bank: 0,
            cachelines_per_row: 0,
            cacheline_bytes: 0,
        };
        for (k, v) in parse_kv(line_no, body)? {
            let v: u32 = parse_num(line_no, k, v)?;
            match k {
                "channels" => g.channels = v,
                "ranks" => g.ranks_per_channel = v,
                "banks" => g.banks_per_rank = v,
                "rows" => g.rows_per_bank = v,
                "cachelines" => g.cachelines_per_row = v,
                "bytes" => g.cacheline_bytes = v,
                other => return Err(Error::format(line_no, format!("unknown geometry key `{other}`"))),
            }
        }
        g.validate().map_err(|e| Error::format(line_no, e.to_string()))?;
        header.geometry = Some(g);
    } else if let Some(body) = text.strip_prefix("#params") {
        for (k, v) in parse_kv(line_no, body)? {
            match k {
                "pattern_penalty_ns" => header.penalty = parse_latency(line_no, k, v)?,
                "jitter_sigma_ns" => {
                    header.jitter = parse_num(line_no, k, v)?;
                    if !(header.jitter.is_finite() && header.jitter >= 0.0) {
                        return Err(Error::format(line_no, "jitter_sigma_ns must be >= 0"));
                    }
                }
                "seed" => header.seed = parse_num(line_no, k, v)?,
                other => return Err(Error::format(line_no, format!("unknown parameter `{other}`"))),
            }
        }
    }
    Ok(())
}

fn parse_location(line_no: usize, g: &Geometry, fields: &[&str]) -> Result<Location> {
    let loc = Location {
        channel: parse_num(line_no, "channel", fields[0])?,
        rank: parse_num(line_no, "rank", fields[1])?,
        bank: parse_num(line_no, "bank", fields[2])?,
        row: parse_num(line_no, "row", fields[3])?,
        cacheline: parse_num(line_no, "cacheline", fields[4])?,
    };
    if !g.contains(&loc) {
        return Err(Error::format(line_no, format!("geometry mismatch: {loc} outside declared geometry")));
    }
    Ok(loc)
}

/// Reads a profile and, optionally, its weak-bit companion.
pub fn import_profile<R: BufRead, W: BufRead>(source: R, weak: Option<W>) -> Result<LatencyProfile> {
    let mut header = Header { geometry: None, penalty: Latency::ZERO, jitter: 0.0, seed: 0 };
    let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));

    match lines.next() {
        Some((_, Ok(first))) if first.trim_end() == PROFILE_MAGIC => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(Error::format(1, format!("expected `{PROFILE_MAGIC}` header"))),
    }

    let mut last_line = 1;
    let mut saw_columns = false;
    // Per-line tRCD, per-row tRP and tRAS, and the seen-line bitset.
    type Tables = (Vec<u16>, Vec<u16>, Vec<u16>, Vec<u64>);
    let mut tables: Option<Tables> = None;
    let mut count = 0u64;

    for (line_no, text) in lines.by_ref() {
        let text = text?;
        last_line = line_no;
        let text = text.trim_end();
        if text.is_empty() {
            continue;
        }
        if !saw_columns {
            if text.starts_with('#') {
                apply_directive(&mut header, line_no, text)?;
                continue;
            }
            if text != PROFILE_COLUMNS {
                return Err(Error::format(line_no, format!("expected column header `{PROFILE_COLUMNS}`")));
            }
            let g = header.geometry.ok_or_else(|| Error::format(line_no, "missing #geometry directive"))?;
            tables = Some((
                vec![0; g.total_lines() as usize],
                vec![0; g.total_rows() as usize],
                vec![0; g.total_rows() as usize],
                vec![0; (g.total_lines() as usize).div_ceil(64)],
            ));
            saw_columns = true;
            continue;
        }
        if text.starts_with('#') {
            continue;
        }
        let g = header.geometry.expect("checked at column header");
        let (trcd, trp, tras, seen) = tables.as_mut().expect("allocated at column header");
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::format(line_no, format!("expected 8 fields, found {}", fields.len())));
        }
        let loc = parse_location(line_no, &g, &fields)?;
        let line = g.line_index(&loc) as usize;
        let row = g.row_index(&loc) as usize;
        if seen[line / 64] >> (line % 64) & 1 == 1 {
            return Err(Error::format(line_no, format!("duplicate location {loc}")));
        }
        seen[line / 64] |= 1 << (line % 64);
        count += 1;

        trcd[line] = parse_threshold(line_no, "min_trcd_ns", fields[5])?;
        let row_trp = parse_threshold(line_no, "min_trp_ns", fields[6])?;
        let row_tras = parse_threshold(line_no, "min_tras_ns", fields[7])?;
        if trp[row] == 0 {
            trp[row] = row_trp;
            tras[row] = row_tras;
        } else if trp[row] != row_trp || tras[row] != row_tras {
            return Err(Error::format(line_no, format!("min_trp_ns/min_tras_ns differ within row of {loc}")));
        }
    }

    let g = header.geometry.ok_or_else(|| Error::format(last_line + 1, "missing #geometry directive"))?;
    let Some((trcd, trp, tras, _)) = tables else {
        return Err(Error::format(last_line + 1, "missing column header"));
    };
    if count != g.total_lines() {
        return Err(Error::format(
            last_line + 1,
            format!("incomplete profile: {count} of {} cache lines present", g.total_lines()),
        ));
    }

    let weak_bits = match weak {
        Some(src) => read_weak_bits(src, &g, header.penalty)?,
        None => Vec::new(),
    };
    LatencyProfile::from_raw(g, trcd, trp, tras, weak_bits, header.penalty, header.jitter, header.seed)
        .map_err(|e| Error::format(last_line, e.to_string()))
}

fn read_weak_bits<R: BufRead>(src: R, g: &Geometry, penalty: Latency) -> Result<Vec<WeakBit>> {
    let mut out: Vec<WeakBit> = Vec::new();
    let mut saw_columns = false;
    for (i, text) in src.lines().enumerate() {
        let line_no = i + 1;
        let text = text?;
        let text = text.trim_end();
        if line_no == 1 {
            if text != WEAK_MAGIC {
                return Err(Error::format(1, format!("expected `{WEAK_MAGIC}` header")));
            }
            continue;
        }
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if !saw_columns {
            if text != WEAK_COLUMNS {
                return Err(Error::format(line_no, format!("expected column header `{WEAK_COLUMNS}`")));
            }
            saw_columns = true;
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::format(line_no, format!("expected 7 fields, found {}", fields.len())));
        }
        let loc = parse_location(line_no, g, &fields)?;
        let bit: u16 = parse_num(line_no, "bit_index", fields[5])?;
        if bit as u32 >= g.bits_per_line() {
            return Err(Error::format(line_no, format!("bit_index {bit} outside {}-bit line", g.bits_per_line())));
        }
        let margin = parse_latency(line_no, "extra_margin_ns", fields[6])?;
        if margin < penalty {
            return Err(Error::format(line_no, format!("extra_margin_ns {margin} below pattern penalty {penalty}")));
        }
        out.push(WeakBit { line: g.line_index(&loc) as u32, bit, margin });
    }
    let mut sorted = out.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|p| (p[0].line, p[0].bit) == (p[1].line, p[1].bit)) {
        return Err(Error::format(0, "duplicate weak bit entries"));
    }
    Ok(sorted)
}
