use std::f64::consts::LN_2;

use super::region::{Granularity, RegionMap};
use crate::device::TimingParams;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Location};
use crate::rng::splitmix64;

const SALT_A: u64 = 0x243f_6a88_85a3_08d3;
const SALT_B: u64 = 0x1319_8a2e_0370_7344;

/// Bloom filter over slow regions.
///
/// A member is served at vendor timings and a non-member at the fastest
/// step. There are no false negatives, so a slow region is never served
/// fast; a false positive only costs latency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlowSetFilter {
    bits: Vec<u64>,
    m: u64,
    k: u32,
    inserted: u64,
    fp_rate_ppm: u32,
    geometry: Geometry,
    granularity: Granularity,
    fast: TimingParams,
    spec: TimingParams,
}

impl SlowSetFilter {
    /// Empty filter sized for `capacity` insertions at false-positive rate
    /// `fp_rate` (`0 < fp_rate < 0.5`).
    pub fn with_capacity(
        capacity: u64,
        fp_rate: f64,
        geometry: Geometry,
        granularity: Granularity,
        fast: TimingParams,
        spec: TimingParams,
    ) -> Result<Self> {
        if !(fp_rate > 0.0 && fp_rate < 0.5) {
            return Err(Error::param(format!("fp_rate {fp_rate} outside (0, 0.5)")));
        }
        let n = capacity.max(1) as f64;
        let m = ((-n * fp_rate.ln()) / (LN_2 * LN_2)).ceil().max(64.0) as u64;
        let k = ((m as f64 / n) * LN_2).round().max(1.0) as u32;
        Ok(SlowSetFilter {
            bits: vec![0; m.div_ceil(64) as usize],
            m,
            k,
            inserted: 0,
            fp_rate_ppm: (fp_rate * 1e6).round() as u32,
            geometry,
            granularity,
            fast,
            spec,
        })
    }

    fn probes(&self, region: u64) -> impl Iterator<Item = u64> + '_ {
        let h1 = splitmix64(region ^ SALT_A);
        let h2 = splitmix64(h1 ^ SALT_B) | 1;
        (0..self.k as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % self.m)
    }

    pub fn insert(&mut self, region: u64) {
        let idx: Vec<u64> = self.probes(region).collect();
        for i in idx {
            self.bits[(i / 64) as usize] |= 1 << (i % 64);
        }
        self.inserted += 1;
    }

    pub fn contains(&self, region: u64) -> bool {
        self.probes(region).all(|i| self.bits[(i / 64) as usize] >> (i % 64) & 1 == 1)
    }

    pub fn bit_count(&self) -> u64 {
        self.m
    }

    pub fn hash_count(&self) -> u32 {
        self.k
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn target_fp_rate(&self) -> f64 {
        self.fp_rate_ppm as f64 / 1e6
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn storage_bytes(&self) -> u64 {
        self.m.div_ceil(8)
    }

    pub fn region_count(&self) -> u64 {
        self.granularity.region_count(&self.geometry)
    }

    pub fn region_timing(&self, region: u64) -> &TimingParams {
        if self.contains(region) {
            &self.spec
        } else {
            &self.fast
        }
    }

    pub fn lookup_timing(&self, loc: &Location) -> Result<TimingParams> {
        self.geometry.check(loc)?;
        let region = self.granularity.region_of_line(&self.geometry, self.geometry.line_index(loc));
        Ok(*self.region_timing(region))
    }
}

/// Filter holding every region of `map` slower than its fastest step.
pub fn compress_slow_set(map: &RegionMap, fp_rate: f64) -> Result<SlowSetFilter> {
    let slow: Vec<u64> = (0..map.region_count()).filter(|&r| map.is_slow(r)).collect();
    let mut f = SlowSetFilter::with_capacity(
        slow.len() as u64,
        fp_rate,
        *map.geometry(),
        map.granularity(),
        *map.fastest(),
        *map.spec(),
    )?;
    for r in slow {
        f.insert(r);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{build_region_map, LatencySteps};
    use crate::device::LatencyProfile;
    use crate::units::Latency;

    fn geometry() -> Geometry {
        Geometry {
            channels: 2,
            ranks_per_channel: 1,
            banks_per_rank: 8,
            rows_per_bank: 1024,
            cachelines_per_row: 128,
            cacheline_bytes: 64,
        }
    }

    fn all_fast() -> LatencyProfile {
        let ns = Latency::from_ns;
        LatencyProfile::uniform(geometry(), ns(7.5), ns(7.5), ns(18.0), ns(0.5)).unwrap()
    }

    #[test]
    fn rejects_bad_rate() {
        let map = build_region_map(&all_fast(), Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
        assert!(compress_slow_set(&map, 0.6).is_err());
        assert!(compress_slow_set(&map, 0.0).is_err());
    }

    #[test]
    fn no_false_negatives() {
        let mut p = all_fast();
        let mut slow_rows = Vec::new();
        for row in (0..1024).step_by(7) {
            let loc = Location { channel: 1, rank: 0, bank: 3, row, cacheline: 5 };
            p.set_line_trcd(&loc, Latency::from_ns(9.0)).unwrap();
            slow_rows.push(geometry().row_index(&loc));
        }
        let map = build_region_map(&p, Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
        let f = compress_slow_set(&map, 0.01).unwrap();
        assert_eq!(f.inserted(), slow_rows.len() as u64);
        for r in slow_rows {
            assert!(f.contains(r));
            assert_eq!(f.region_timing(r), map.spec());
        }
    }

    #[test]
    fn empty_filter_serves_fast() {
        let map = build_region_map(&all_fast(), Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
        let f = compress_slow_set(&map, 0.01).unwrap();
        assert_eq!(f.inserted(), 0);
        let loc = Location { channel: 0, rank: 0, bank: 0, row: 0, cacheline: 0 };
        assert_eq!(f.lookup_timing(&loc).unwrap(), *map.fastest());
    }
}
