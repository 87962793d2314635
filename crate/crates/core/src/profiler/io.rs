//! BER and error-map CSV.

use std::io::{BufRead, Write};

use super::sweep::{BerRow, BerTable, ErrorMap, Param, SweepPoint};
use crate::error::{Error, Result};
use crate::units::Latency;

pub const BER_MAGIC: &str = "#flydram-ber v1";
pub const ERRMAP_MAGIC: &str = "#flydram-errmap v1";
const BER_COLUMNS: &str = "param,value_ns,pattern,round,bit_errors,bits_tested,ber";
const ERRMAP_COLUMNS: &str = "bank,row,cacheline,error_probability";

/// Lowest latency at which the threshold model is calibrated; rows below it
/// are flagged as extrapolated.
const CALIBRATED_FLOOR: Latency = Latency::from_ps(7_500);

pub fn write_ber_csv<W: Write>(table: &BerTable, mut out: W) -> Result<()> {
    writeln!(out, "{BER_MAGIC}")?;
    if table.rows.iter().any(|r| r.param != Param::Tras && r.value < CALIBRATED_FLOOR) {
        writeln!(out, "#note trcd/trp values below {CALIBRATED_FLOOR} ns are extrapolated")?;
    }
    writeln!(out, "{BER_COLUMNS}")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.param,
            r.value,
            r.pattern,
            r.round,
            r.bit_errors,
            r.bits_tested,
            r.ber()
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a BER CSV, re-checking that each `ber` equals its counts.
pub fn read_ber_csv<R: BufRead>(source: R) -> Result<BerTable> {
    let mut table = BerTable::default();
    let mut saw_columns = false;
    for (i, text) in source.lines().enumerate() {
        let line_no = i + 1;
        let text = text?;
        let text = text.trim_end();
        if line_no == 1 {
            if text != BER_MAGIC {
                return Err(Error::format(1, format!("expected `{BER_MAGIC}` header")));
            }
            continue;
        }
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if !saw_columns {
            if text != BER_COLUMNS {
                return Err(Error::format(line_no, format!("expected column header `{BER_COLUMNS}`")));
            }
            saw_columns = true;
            continue;
        }
        let f: Vec<&str> = text.split(',').collect();
        if f.len() != 7 {
            return Err(Error::format(line_no, format!("expected 7 fields, found {}", f.len())));
        }
        let bad = |what: &str, e: String| Error::format(line_no, format!("{what}: {e}"));
        let row = BerRow {
            param: f[0].parse().map_err(|e: Error| bad("param", e.to_string()))?,
            value: f[1].parse().map_err(|e: Error| bad("value_ns", e.to_string()))?,
            pattern: f[2].parse().map_err(|e: Error| bad("pattern", e.to_string()))?,
            round: f[3].parse().map_err(|e: std::num::ParseIntError| bad("round", e.to_string()))?,
            bit_errors: f[4].parse().map_err(|e: std::num::ParseIntError| bad("bit_errors", e.to_string()))?,
            bits_tested: f[5].parse().map_err(|e: std::num::ParseIntError| bad("bits_tested", e.to_string()))?,
        };
        if row.bits_tested == 0 || row.bit_errors > row.bits_tested {
            return Err(Error::format(line_no, "bit_errors must lie in [0, bits_tested] with bits_tested > 0"));
        }
        let ber: f64 = f[6].parse().map_err(|_| Error::format(line_no, format!("invalid ber `{}`", f[6])))?;
        if ber != row.ber() {
            return Err(Error::format(line_no, "ber disagrees with bit_errors / bits_tested"));
        }
        table.rows.push(row);
    }
    if !saw_columns {
        return Err(Error::format(1, "missing column header"));
    }
    Ok(table)
}

/// Writes the nonzero cells of `map`; `bank` is the global bank index.
pub fn write_error_map_csv<W: Write>(map: &ErrorMap, point: SweepPoint, mut out: W) -> Result<()> {
    let g = map.geometry();
    writeln!(out, "{ERRMAP_MAGIC}")?;
    writeln!(out, "{}", g.directive())?;
    writeln!(out, "#point param={} value_ns={} trials={}", point.param, point.value, map.trials())?;
    writeln!(out, "{ERRMAP_COLUMNS}")?;
    for (loc, p) in map.nonzero() {
        writeln!(out, "{},{},{},{}", g.bank_index(&loc), loc.row, loc.cacheline, p)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DataPattern;
    use crate::geometry::Geometry;
    use std::io::Cursor;

    fn table() -> BerTable {
        BerTable {
            rows: vec![
                BerRow {
                    param: Param::Trcd,
                    value: Latency::from_ps(5_000),
                    pattern: DataPattern::Random(3),
                    round: 0,
                    bit_errors: 7,
                    bits_tested: 3 * 512,
                },
                BerRow {
                    param: Param::Tras,
                    value: Latency::from_ps(27_000),
                    pattern: DataPattern::AllZeros,
                    round: 1,
                    bit_errors: 0,
                    bits_tested: 512,
                },
            ],
        }
    }

    #[test]
    fn ber_roundtrip() {
        let mut buf = Vec::new();
        write_ber_csv(&table(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("#note"));
        assert_eq!(read_ber_csv(Cursor::new(&text)).unwrap(), table());
        let tampered = text.replace(",7,1536,", ",8,1536,");
        assert!(matches!(read_ber_csv(Cursor::new(tampered)), Err(Error::Format { line: 4, .. })));
        assert!(read_ber_csv(Cursor::new("#flydram-stats v1\n")).is_err());
    }

    #[test]
    fn error_map_rows() {
        let g = Geometry {
            channels: 2,
            ranks_per_channel: 1,
            banks_per_rank: 2,
            rows_per_bank: 4,
            cachelines_per_row: 4,
            cacheline_bytes: 64,
        };
        let m = ErrorMap::from_counts(g, 4, vec![(33, 1)]).unwrap();
        let mut buf = Vec::new();
        let point = SweepPoint { param: Param::Trcd, value: Latency::from_ps(7_500) };
        write_error_map_csv(&m, point, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().last().unwrap(), "2,0,1,0.25");
    }
}
