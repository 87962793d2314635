//! Memory traces: synthetic generation and the text file format.
//!
//! ```text
//! #flydram-trace v1
//! #streams 4
//! 0 R 0x1f40
//! ```
//!
//! One `<tick> <R|W> <hex address>` entry per line; `#` starts a comment.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use super::fingerprint::StreamHasher;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::rng;

pub const TRACE_MAGIC: &str = "#flydram-trace v1";
pub const PAGE_BYTES: u64 = 4096;
const TRACE_KEY: u64 = 0x0054_5241_4345;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub tick: u64,
    pub op: Op,
    pub addr: u64,
}

/// Timestamped requests, interleaved round-robin from `stream_count`
/// streams. Ticks never decrease.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemoryTrace {
    pub entries: Vec<TraceEntry>,
    pub stream_count: u32,
}

impl MemoryTrace {
    pub fn new(entries: Vec<TraceEntry>, stream_count: u32) -> Result<Self> {
        if stream_count == 0 {
            return Err(Error::param("stream_count must be positive"));
        }
        if let Some(i) = entries.windows(2).position(|w| w[1].tick < w[0].tick) {
            return Err(Error::param(format!("tick decreases at entry {}", i + 1)));
        }
        Ok(MemoryTrace { entries, stream_count })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Content hash over entries and stream count.
    pub fn fingerprint(&self) -> String {
        let mut h = StreamHasher::new();
        h.update(&self.stream_count.to_le_bytes());
        let mut buf = Vec::with_capacity(17 * 4096);
        for chunk in self.entries.chunks(4096) {
            buf.clear();
            for e in chunk {
                buf.extend_from_slice(&e.tick.to_le_bytes());
                buf.push(matches!(e.op, Op::Write) as u8);
                buf.extend_from_slice(&e.addr.to_le_bytes());
            }
            h.update(&buf);
        }
        h.finish()
    }

    /// Access count per 4 KiB page of `geometry`.
    pub fn page_hotness(&self, geometry: &Geometry) -> Result<Vec<u64>> {
        let pages = page_count(geometry)?;
        let mut hot = vec![0u64; pages as usize];
        for e in &self.entries {
            let p = e.addr / PAGE_BYTES;
            *hot.get_mut(p as usize).ok_or_else(|| Error::Address(format!("{:#x} beyond capacity", e.addr)))? += 1;
        }
        Ok(hot)
    }
}

pub(crate) fn page_count(geometry: &Geometry) -> Result<u64> {
    let cap = geometry.capacity_bytes();
    if !cap.is_multiple_of(PAGE_BYTES) || cap == 0 {
        return Err(Error::param(format!("capacity {cap} is not a whole number of 4 KiB pages")));
    }
    Ok(cap / PAGE_BYTES)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceKind {
    /// Each stream walks consecutive cache lines from a random start.
    Stream,
    /// Cache lines drawn uniformly over the whole capacity.
    RandomUniform,
    /// `hot_bias` of accesses land in a random `fraction_hot` of the pages.
    Hotspot { fraction_hot: f64, hot_bias: f64 },
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceKind::Stream => f.write_str("stream"),
            TraceKind::RandomUniform => f.write_str("random_uniform"),
            TraceKind::Hotspot { fraction_hot, hot_bias } => write!(f, "hotspot:{fraction_hot}:{hot_bias}"),
        }
    }
}

impl FromStr for TraceKind {
    type Err = Error;

    /// `stream`, `random_uniform`, `hotspot` (0.1 of pages, 0.9 of accesses)
    /// or `hotspot:<fraction_hot>:<hot_bias>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "stream" => Ok(TraceKind::Stream),
            "random_uniform" | "random" => Ok(TraceKind::RandomUniform),
            "hotspot" => Ok(TraceKind::Hotspot { fraction_hot: 0.1, hot_bias: 0.9 }),
            other => {
                let parts: Vec<&str> = other.split(':').collect();
                match parts.as_slice() {
                    ["hotspot", f, b] => {
                        let num = |v: &str| {
                            v.parse::<f64>().map_err(|_| Error::param(format!("invalid number `{v}` in `{other}`")))
                        };
                        Ok(TraceKind::Hotspot { fraction_hot: num(f)?, hot_bias: num(b)? })
                    }
                    _ => Err(Error::param(format!("unknown trace kind `{other}`"))),
                }
            }
        }
    }
}

/// Reads-only trace of `length` requests; entry `i` has tick
/// `i / mlp_limit`. Stream walks one run of consecutive cache lines.
pub fn gen_trace(
    kind: TraceKind,
    length: usize,
    mlp_limit: u32,
    seed: u64,
    geometry: &Geometry,
) -> Result<MemoryTrace> {
    geometry.validate()?;
    if length == 0 {
        return Err(Error::param("trace length must be positive"));
    }
    if mlp_limit == 0 {
        return Err(Error::param("mlp_limit must be positive"));
    }
    let line = geometry.cacheline_bytes as u64;
    let lines = geometry.total_lines();
    let streams = mlp_limit as u64;
    let mut rng = rng::stream(seed, &[TRACE_KEY]);
    let tick = |i: usize| i as u64 / streams;
    let entry = |i: usize, l: u64| TraceEntry { tick: tick(i), op: Op::Read, addr: l * line };

    let entries: Vec<TraceEntry> = match kind {
        TraceKind::Stream => {
            let start = rng.random_range(0..lines);
            (0..length).map(|i| entry(i, (start + i as u64) % lines)).collect()
        }
        TraceKind::RandomUniform => (0..length).map(|i| entry(i, rng.random_range(0..lines))).collect(),
        TraceKind::Hotspot { fraction_hot, hot_bias } => {
            if !(fraction_hot > 0.0 && fraction_hot < 1.0) {
                return Err(Error::param(format!("fraction_hot {fraction_hot} outside (0, 1)")));
            }
            if !(0.0..=1.0).contains(&hot_bias) {
                return Err(Error::param(format!("hot_bias {hot_bias} outside [0, 1]")));
            }
            let pages = page_count(geometry)?;
            if pages < 2 {
                return Err(Error::param("hotspot needs at least two pages"));
            }
            let hot_n = ((fraction_hot * pages as f64).round() as u64).clamp(1, pages - 1);
            let mut is_hot = vec![false; pages as usize];
            let hot: Vec<u64> =
                index::sample(&mut rng, pages as usize, hot_n as usize).iter().map(|p| p as u64).collect();
            hot.iter().for_each(|&p| is_hot[p as usize] = true);
            let lines_per_page = PAGE_BYTES / line;
            (0..length)
                .map(|i| {
                    let page = if rng.random_bool(hot_bias) {
                        hot[rng.random_range(0..hot.len())]
                    } else {
                        loop {
                            let p = rng.random_range(0..pages);
                            if !is_hot[p as usize] {
                                break p;
                            }
                        }
                    };
                    entry(i, page * lines_per_page + rng.random_range(0..lines_per_page))
                })
                .collect()
        }
    };
    MemoryTrace::new(entries, mlp_limit)
}

pub fn write_trace<W: Write>(trace: &MemoryTrace, mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_MAGIC}")?;
    writeln!(out, "#streams {}", trace.stream_count)?;
    for e in &trace.entries {
        let op = match e.op {
            Op::Read => 'R',
            Op::Write => 'W',
        };
        writeln!(out, "{} {op} {:#x}", e.tick, e.addr)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: BufRead>(source: R) -> Result<MemoryTrace> {
    let mut entries: Vec<TraceEntry> = Vec::new();
    let mut streams = 1;
    for (i, text) in source.lines().enumerate() {
        let line_no = i + 1;
        let text = text?;
        let text = text.trim();
        if let Some(n) = text.strip_prefix("#streams") {
            streams = n
                .trim()
                .parse()
                .ok()
                .filter(|&n: &u32| n > 0)
                .ok_or_else(|| Error::format(line_no, format!("invalid stream count `{}`", n.trim())))?;
            continue;
        }
        let body = text.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let f: Vec<&str> = body.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::format(line_no, "expected `<tick> <R|W> <hex-address>`"));
        }
        let tick: u64 = f[0].parse().map_err(|_| Error::format(line_no, format!("invalid tick `{}`", f[0])))?;
        let op = match f[1] {
            "R" | "r" => Op::Read,
            "W" | "w" => Op::Write,
            other => return Err(Error::format(line_no, format!("invalid op `{other}`"))),
        };
        let hex = f[2].trim_start_matches("0x").trim_start_matches("0X");
        let addr =
            u64::from_str_radix(hex, 16).map_err(|_| Error::format(line_no, format!("invalid address `{}`", f[2])))?;
        if entries.last().is_some_and(|l| l.tick > tick) {
            return Err(Error::format(line_no, "tick decreases"));
        }
        entries.push(TraceEntry { tick, op, addr });
    }
    MemoryTrace::new(entries, streams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn g() -> Geometry {
        Geometry {
            channels: 2,
            ranks_per_channel: 1,
            banks_per_rank: 8,
            rows_per_bank: 256,
            cachelines_per_row: 128,
            cacheline_bytes: 64,
        }
    }

    #[test]
    fn stream_is_consecutive() {
        let t = gen_trace(TraceKind::Stream, 256, 1, 5, &g()).unwrap();
        assert_eq!(t.len(), 256);
        let cap = g().capacity_bytes();
        for w in t.entries.windows(2) {
            assert_eq!((w[0].addr + 64) % cap, w[1].addr);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let k = TraceKind::Hotspot { fraction_hot: 0.1, hot_bias: 0.9 };
        assert_eq!(gen_trace(k, 1000, 4, 1, &g()).unwrap(), gen_trace(k, 1000, 4, 1, &g()).unwrap());
        assert_ne!(gen_trace(k, 1000, 4, 1, &g()).unwrap(), gen_trace(k, 1000, 4, 2, &g()).unwrap());
    }

    #[test]
    fn invalid_params() {
        assert!(gen_trace(TraceKind::Stream, 0, 1, 1, &g()).is_err());
        assert!(gen_trace(TraceKind::Hotspot { fraction_hot: 1.0, hot_bias: 0.5 }, 10, 1, 1, &g()).is_err());
        assert!(gen_trace(TraceKind::Hotspot { fraction_hot: 0.2, hot_bias: 1.5 }, 10, 1, 1, &g()).is_err());
        assert!("zipf".parse::<TraceKind>().is_err());
        assert_eq!(
            "hotspot:0.2:0.8".parse::<TraceKind>().unwrap(),
            TraceKind::Hotspot { fraction_hot: 0.2, hot_bias: 0.8 }
        );
    }

    #[test]
    fn file_roundtrip() {
        let t = gen_trace(TraceKind::RandomUniform, 100, 3, 9, &g()).unwrap();
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        assert_eq!(read_trace(Cursor::new(&buf)).unwrap(), t);
        let bad = "0 R 0x40\n1 X 0x80\n";
        assert!(matches!(read_trace(Cursor::new(bad)), Err(Error::Format { line: 2, .. })));
        let back = "5 R 0x40 # trailing\n1 W 0x80\n";
        assert!(matches!(read_trace(Cursor::new(back)), Err(Error::Format { line: 2, .. })));
    }
}
