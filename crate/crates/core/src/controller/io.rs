//! Region-map CSV.
//!
//! ```text
//! #flydram-regionmap v1
//! #geometry channels=2 ranks=1 banks=8 rows=16384 cachelines=128 bytes=64
//! granularity,row
//! region_index,trcd_ns,trp_ns,tras_ns
//! 0,7.500,7.500,27.000
//! ```
//!
//! Regions may be omitted; lookups in an omitted region fail with a mapping
//! error.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use super::region::{Granularity, LatencySteps, RegionMap, MISSING};
use crate::device::TimingParams;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::units::Latency;

pub const REGIONMAP_MAGIC: &str = "#flydram-regionmap v1";
const COLUMNS: &str = "region_index,trcd_ns,trp_ns,tras_ns";

pub fn export_region_map<W: Write>(map: &RegionMap, mut out: W) -> Result<()> {
    let g = map.geometry();
    writeln!(out, "{REGIONMAP_MAGIC}")?;
    writeln!(out, "{}", g.directive())?;
    writeln!(out, "granularity,{}", map.granularity())?;
    writeln!(out, "{COLUMNS}")?;
    for r in 0..map.region_count() {
        if let Some(t) = map.region_timing(r) {
            writeln!(out, "{r},{},{},{}", t.trcd(), t.trp(), t.tras())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a map for `geometry` whose timings refine `spec`. Each parameter's
/// steps become the distinct values present plus the vendor value.
pub fn import_region_map<R: BufRead>(source: R, geometry: &Geometry, spec: &TimingParams) -> Result<RegionMap> {
    geometry.validate()?;
    let mut granularity = None;
    let mut saw_columns = false;
    let mut rows: Vec<(usize, u64, [Latency; 3])> = Vec::new();
    let mut last = 0;

    for (i, text) in source.lines().enumerate() {
        let line_no = i + 1;
        last = line_no;
        let text = text?;
        let text = text.trim_end();
        if line_no == 1 {
            if text != REGIONMAP_MAGIC {
                return Err(Error::format(1, format!("expected `{REGIONMAP_MAGIC}` header")));
            }
            continue;
        }
        if text.is_empty() {
            continue;
        }
        if text.starts_with("#geometry") {
            if text != geometry.directive() {
                return Err(Error::format(line_no, "geometry mismatch with the selected geometry"));
            }
            continue;
        }
        if text.starts_with('#') {
            continue;
        }
        if granularity.is_none() {
            let kind = text
                .strip_prefix("granularity,")
                .ok_or_else(|| Error::format(line_no, "expected `granularity,<kind>`"))?;
            let g: Granularity = kind.parse().map_err(|e: Error| Error::format(line_no, e.to_string()))?;
            g.validate(geometry).map_err(|e| Error::format(line_no, e.to_string()))?;
            granularity = Some(g);
            continue;
        }
        if !saw_columns {
            if text != COLUMNS {
                return Err(Error::format(line_no, format!("expected column header `{COLUMNS}`")));
            }
            saw_columns = true;
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::format(line_no, format!("expected 4 fields, found {}", fields.len())));
        }
        let region: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(line_no, format!("invalid region_index `{}`", fields[0])))?;
        let mut vals = [Latency::ZERO; 3];
        let limits = [spec.trcd(), spec.trp(), spec.tras()];
        for (j, name) in ["trcd_ns", "trp_ns", "tras_ns"].iter().enumerate() {
            let v: Latency =
                fields[j + 1].parse().map_err(|e: Error| Error::format(line_no, format!("{name}: {e}")))?;
            if v == Latency::ZERO || v > limits[j] {
                return Err(Error::format(line_no, format!("{name} {v} outside (0, {}]", limits[j])));
            }
            vals[j] = v;
        }
        rows.push((line_no, region, vals));
    }

    let granularity = granularity.ok_or_else(|| Error::format(last + 1, "missing granularity line"))?;
    if !saw_columns {
        return Err(Error::format(last + 1, "missing column header"));
    }
    let count = granularity.region_count(geometry);
    let mut sets: [BTreeSet<Latency>; 3] = Default::default();
    for (_, _, v) in &rows {
        for j in 0..3 {
            sets[j].insert(v[j]);
        }
    }
    sets[0].insert(spec.trcd());
    sets[1].insert(spec.trp());
    sets[2].insert(spec.tras());
    let [a, b, c] = sets.map(|s| s.into_iter().collect::<Vec<_>>());
    let steps = LatencySteps::new(*spec, a, b, c).map_err(|e| Error::format(last, e.to_string()))?;

    let lists = [steps.trcd(), steps.trp(), steps.tras()];
    let mut entries = vec![[MISSING; 3]; count as usize];
    for (line_no, region, v) in rows {
        if region >= count {
            return Err(Error::format(line_no, format!("region_index {region} outside {count} regions")));
        }
        let e = &mut entries[region as usize];
        if *e != [MISSING; 3] {
            return Err(Error::format(line_no, format!("duplicate region_index {region}")));
        }
        for j in 0..3 {
            e[j] = lists[j].binary_search(&v[j]).expect("value inserted above") as u8;
        }
    }
    RegionMap::from_entries(*geometry, granularity, steps, entries).map_err(|e| Error::format(last, e.to_string()))
}
