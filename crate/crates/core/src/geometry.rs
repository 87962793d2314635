//! Module organisation and physical address decoding.

use std::fmt;

use crate::error::{Error, Result};

/// Shape of the simulated memory system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Geometry {
    pub channels: u32,
    pub ranks_per_channel: u32,
    pub banks_per_rank: u32,
    pub rows_per_bank: u32,
    pub cachelines_per_row: u32,
    pub cacheline_bytes: u32,
}

impl Default for Geometry {
    /// Two channels of a 1 GiB DDR3 DIMM: 8 banks of 8 KiB rows.
    fn default() -> Self {
        Geometry {
            channels: 2,
            ranks_per_channel: 1,
            banks_per_rank: 8,
            rows_per_bank: 16_384,
            cachelines_per_row: 128,
            cacheline_bytes: 64,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("channels", self.channels),
            ("ranks_per_channel", self.ranks_per_channel),
            ("banks_per_rank", self.banks_per_rank),
            ("rows_per_bank", self.rows_per_bank),
            ("cachelines_per_row", self.cachelines_per_row),
            ("cacheline_bytes", self.cacheline_bytes),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::param(format!("geometry {name} must be >= 1")));
            }
        }
        if !self.cacheline_bytes.is_power_of_two() {
            return Err(Error::param("cacheline_bytes must be a power of two"));
        }
        if self.total_lines() > u32::MAX as u64 {
            return Err(Error::param("geometry has more than 2^32 cache lines"));
        }
        Ok(())
    }

    pub fn banks_per_channel(&self) -> u32 {
        self.ranks_per_channel * self.banks_per_rank
    }

    pub fn total_banks(&self) -> u64 {
        self.channels as u64 * self.banks_per_channel() as u64
    }

    pub fn total_rows(&self) -> u64 {
        self.total_banks() * self.rows_per_bank as u64
    }

    pub fn total_lines(&self) -> u64 {
        self.total_rows() * self.cachelines_per_row as u64
    }

    pub fn lines_per_bank(&self) -> u64 {
        self.rows_per_bank as u64 * self.cachelines_per_row as u64
    }

    pub fn bits_per_line(&self) -> u32 {
        self.cacheline_bytes * 8
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.total_lines() * self.cacheline_bytes as u64
    }

    pub fn contains(&self, loc: &Location) -> bool {
        loc.channel < self.channels
            && loc.rank < self.ranks_per_channel
            && loc.bank < self.banks_per_rank
            && loc.row < self.rows_per_bank
            && loc.cacheline < self.cachelines_per_row
    }

    pub fn check(&self, loc: &Location) -> Result<()> {
        if self.contains(loc) {
            Ok(())
        } else {
            Err(Error::Address(format!("{loc} outside geometry")))
        }
    }

    /// Bank index within the location's channel.
    pub fn channel_bank(&self, loc: &Location) -> usize {
        (loc.rank * self.banks_per_rank + loc.bank) as usize
    }

    pub fn bank_index(&self, loc: &Location) -> u64 {
        (loc.channel as u64 * self.ranks_per_channel as u64 + loc.rank as u64) * self.banks_per_rank as u64
            + loc.bank as u64
    }

    pub fn row_index(&self, loc: &Location) -> u64 {
        self.bank_index(loc) * self.rows_per_bank as u64 + loc.row as u64
    }

    pub fn line_index(&self, loc: &Location) -> u64 {
        self.row_index(loc) * self.cachelines_per_row as u64 + loc.cacheline as u64
    }

    /// Inverse of [`Geometry::line_index`].
    pub fn line_location(&self, mut index: u64) -> Location {
        let cacheline = (index % self.cachelines_per_row as u64) as u32;
        index /= self.cachelines_per_row as u64;
        let row = (index % self.rows_per_bank as u64) as u32;
        index /= self.rows_per_bank as u64;
        let bank = (index % self.banks_per_rank as u64) as u32;
        index /= self.banks_per_rank as u64;
        let rank = (index % self.ranks_per_channel as u64) as u32;
        index /= self.ranks_per_channel as u64;
        Location { channel: index as u32, rank, bank, row, cacheline }
    }

    /// `#geometry key=value ...` line used by the CSV formats.
    pub fn directive(&self) -> String {
        format!(
            "#geometry channels={} ranks={} banks={} rows={} cachelines={} bytes={}",
            self.channels,
            self.ranks_per_channel,
            self.banks_per_rank,
            self.rows_per_bank,
            self.cachelines_per_row,
            self.cacheline_bytes
        )
    }

    /// Physical address decoding used by the controller and trace tools.
    pub fn mapping(&self) -> AddressMapping {
        AddressMapping { geometry: *self }
    }
}

/// A cache line position inside the module.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub channel: u32,
    pub rank: u32,
    pub bank: u32,
    pub row: u32,
    pub cacheline: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ch{}/rk{}/ba{}/row{}/cl{}", self.channel, self.rank, self.bank, self.row, self.cacheline)
    }
}

/// Cache-line interleaved physical address layout, from least significant:
/// byte offset, channel, cache line within row, bank, row, rank.
///
/// Fields are decoded by successive division so non power-of-two counts
/// still form a bijection over `0..capacity`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AddressMapping {
    geometry: Geometry,
}

impl AddressMapping {
    pub fn decode(&self, addr: u64) -> Result<Location> {
        let g = &self.geometry;
        if addr >= g.capacity_bytes() {
            return Err(Error::Address(format!("{addr:#x} beyond capacity {:#x}", g.capacity_bytes())));
        }
        let mut rest = addr / g.cacheline_bytes as u64;
        let mut take = |n: u32| {
            let v = (rest % n as u64) as u32;
            rest /= n as u64;
            v
        };
        let channel = take(g.channels);
        let cacheline = take(g.cachelines_per_row);
        let bank = take(g.banks_per_rank);
        let row = take(g.rows_per_bank);
        let rank = take(g.ranks_per_channel);
        Ok(Location { channel, rank, bank, row, cacheline })
    }

    /// Base byte address of the cache line at `loc`.
    pub fn encode(&self, loc: &Location) -> Result<u64> {
        let g = &self.geometry;
        g.check(loc)?;
        let mut addr = loc.rank as u64;
        addr = addr * g.rows_per_bank as u64 + loc.row as u64;
        addr = addr * g.banks_per_rank as u64 + loc.bank as u64;
        addr = addr * g.cachelines_per_row as u64 + loc.cacheline as u64;
        addr = addr * g.channels as u64 + loc.channel as u64;
        Ok(addr * g.cacheline_bytes as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_two_gib() {
        let g = Geometry::default();
        g.validate().unwrap();
        assert_eq!(g.capacity_bytes(), 2 << 30);
        // 1 GiB per channel over 8 banks of 8 KiB rows.
        assert_eq!((1u64 << 30) / (8 * 8 * 1024), g.rows_per_bank as u64);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Geometry { banks_per_rank: 0, ..Geometry::default() }.validate().is_err());
        assert!(Geometry { cacheline_bytes: 48, ..Geometry::default() }.validate().is_err());
    }

    #[test]
    fn bit_layout_matches_documentation() {
        let g = Geometry::default();
        let m = g.mapping();
        // offset 6 bits, channel 1 bit, cacheline 7 bits, bank 3 bits, row 14 bits.
        let addr = (5u64 << (6 + 1 + 7 + 3)) | (3 << (6 + 1 + 7)) | (17 << 7) | (1 << 6) | 0x21;
        let loc = m.decode(addr).unwrap();
        assert_eq!(loc, Location { channel: 1, rank: 0, bank: 3, row: 5, cacheline: 17 });
        assert_eq!(m.encode(&loc).unwrap(), addr & !0x3f);
        assert!(m.decode(g.capacity_bytes()).is_err());
    }

    #[test]
    fn line_index_roundtrip() {
        let g = Geometry {
            channels: 2,
            ranks_per_channel: 2,
            banks_per_rank: 3,
            rows_per_bank: 5,
            cachelines_per_row: 7,
            cacheline_bytes: 64,
        };
        for i in 0..g.total_lines() {
            let loc = g.line_location(i);
            assert!(g.contains(&loc));
            assert_eq!(g.line_index(&loc), i);
            let a = g.mapping().encode(&loc).unwrap();
            assert_eq!(g.mapping().decode(a + 3).unwrap(), loc);
        }
    }
}
