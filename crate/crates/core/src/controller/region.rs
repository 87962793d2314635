use std::fmt;
use std::str::FromStr;

use crate::device::{LatencyProfile, TimingParams};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Location};
use crate::units::Latency;

/// Size of the address regions that share one set of timings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Granularity {
    /// `n` adjacent cache lines of one row; `n` divides the row length.
    CachelineGroup(u32),
    Row,
    Bank,
}

impl Granularity {
    pub fn validate(&self, geometry: &Geometry) -> Result<()> {
        if let Granularity::CachelineGroup(n) = *self {
            if n == 0 || !geometry.cachelines_per_row.is_multiple_of(n) {
                return Err(Error::param(format!(
                    "cache-line group size {n} does not divide {} lines per row",
                    geometry.cachelines_per_row
                )));
            }
        }
        Ok(())
    }

    /// Number of cache lines per region.
    pub fn lines_per_region(&self, geometry: &Geometry) -> u64 {
        match *self {
            Granularity::CachelineGroup(n) => n as u64,
            Granularity::Row => geometry.cachelines_per_row as u64,
            Granularity::Bank => geometry.lines_per_bank(),
        }
    }

    pub fn region_count(&self, geometry: &Geometry) -> u64 {
        geometry.total_lines() / self.lines_per_region(geometry)
    }

    /// Region containing the line with global index `line`.
    pub fn region_of_line(&self, geometry: &Geometry, line: u64) -> u64 {
        line / self.lines_per_region(geometry)
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::CachelineGroup(n) => write!(f, "cacheline_group:{n}"),
            Granularity::Row => f.write_str("row"),
            Granularity::Bank => f.write_str("bank"),
        }
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "row" => Ok(Granularity::Row),
            "bank" => Ok(Granularity::Bank),
            other => {
                let n = other
                    .strip_prefix("cacheline_group:")
                    .or_else(|| other.strip_prefix("cacheline_group="))
                    .ok_or_else(|| Error::param(format!("unknown granularity `{other}`")))?;
                let n: u32 = n.parse().map_err(|_| Error::param(format!("invalid group size in `{other}`")))?;
                if n == 0 {
                    return Err(Error::param("cache-line group size must be positive"));
                }
                Ok(Granularity::CachelineGroup(n))
            }
        }
    }
}

/// Candidate latencies per parameter plus the vendor timings they refine.
///
/// Each list is strictly ascending, ends at the vendor value, and has at
/// most 255 entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatencySteps {
    spec: TimingParams,
    trcd: Vec<Latency>,
    trp: Vec<Latency>,
    tras: Vec<Latency>,
}

fn check_steps(name: &str, steps: &[Latency], spec: Latency) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::param(format!("{name} step list is empty")));
    }
    if steps.len() > u8::MAX as usize {
        return Err(Error::param(format!("{name} has more than 255 steps")));
    }
    if steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(format!("{name} steps must be strictly ascending")));
    }
    if steps[0] == Latency::ZERO {
        return Err(Error::param(format!("{name} steps must be positive")));
    }
    if *steps.last().unwrap() != spec {
        return Err(Error::param(format!("{name} steps must end at the vendor value {spec} ns")));
    }
    Ok(())
}

impl LatencySteps {
    pub fn new(spec: TimingParams, trcd: Vec<Latency>, trp: Vec<Latency>, tras: Vec<Latency>) -> Result<Self> {
        check_steps("tRCD", &trcd, spec.trcd())?;
        check_steps("tRP", &trp, spec.trp())?;
        check_steps("tRAS", &tras, spec.tras())?;
        Ok(LatencySteps { spec, trcd, trp, tras })
    }

    /// {7.5, 10, 12.5, 13.125} ns for tRCD and tRP, {27, 36} ns for tRAS,
    /// over DDR3-1333H.
    pub fn ddr3_default() -> Self {
        let ns = |v: &[u32]| v.iter().map(|&ps| Latency::from_ps(ps)).collect::<Vec<_>>();
        let core = ns(&[7_500, 10_000, 12_500, 13_125]);
        LatencySteps::new(TimingParams::ddr3_1333h(), core.clone(), core, ns(&[27_000, 36_000]))
            .expect("default steps are valid")
    }

    pub fn spec(&self) -> &TimingParams {
        &self.spec
    }

    pub fn trcd(&self) -> &[Latency] {
        &self.trcd
    }

    pub fn trp(&self) -> &[Latency] {
        &self.trp
    }

    pub fn tras(&self) -> &[Latency] {
        &self.tras
    }

    fn levels(&self) -> [usize; 3] {
        [self.trcd.len(), self.trp.len(), self.tras.len()]
    }
}

/// Marks a region absent from a partial map.
pub(crate) const MISSING: u8 = u8::MAX;

/// Per-region timings as step indices, with the timing combinations
/// precomputed so lookup is a table read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionMap {
    geometry: Geometry,
    granularity: Granularity,
    steps: LatencySteps,
    entries: Vec<[u8; 3]>,
    combos: Vec<TimingParams>,
}

fn smallest_step_at_least(steps: &[Latency], need: Latency, what: &str) -> Result<u8> {
    let i = steps.partition_point(|&s| s < need);
    if i == steps.len() {
        return Err(Error::param(format!("{what} of {need} ns exceeds the vendor value {} ns", steps.last().unwrap())));
    }
    Ok(i as u8)
}

impl RegionMap {
    pub(crate) fn from_entries(
        geometry: Geometry,
        granularity: Granularity,
        steps: LatencySteps,
        entries: Vec<[u8; 3]>,
    ) -> Result<Self> {
        granularity.validate(&geometry)?;
        if entries.len() as u64 != granularity.region_count(&geometry) {
            return Err(Error::param("region count does not match geometry"));
        }
        let [a, b, c] = steps.levels();
        let mut combos = Vec::with_capacity(a * b * c);
        for &trcd in &steps.trcd {
            for &trp in &steps.trp {
                for &tras in &steps.tras {
                    combos.push(steps.spec.with_core(trcd, trp, tras)?);
                }
            }
        }
        Ok(RegionMap { geometry, granularity, steps, entries, combos })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn steps(&self) -> &LatencySteps {
        &self.steps
    }

    pub fn spec(&self) -> &TimingParams {
        &self.steps.spec
    }

    pub fn region_count(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn region_of(&self, loc: &Location) -> Result<u64> {
        self.geometry.check(loc)?;
        Ok(self.granularity.region_of_line(&self.geometry, self.geometry.line_index(loc)))
    }

    fn combo(&self, e: [u8; 3]) -> &TimingParams {
        let [_, b, c] = self.steps.levels();
        &self.combos[(e[0] as usize * b + e[1] as usize) * c + e[2] as usize]
    }

    /// Timings of region `region`, or `None` when the map has no entry.
    pub fn region_timing(&self, region: u64) -> Option<&TimingParams> {
        let e = *self.entries.get(region as usize)?;
        if e.contains(&MISSING) {
            None
        } else {
            Some(self.combo(e))
        }
    }

    pub(crate) fn region_steps(&self, region: u64) -> [u8; 3] {
        self.entries[region as usize]
    }

    /// Timings at the first step of every parameter.
    pub fn fastest(&self) -> &TimingParams {
        &self.combos[0]
    }

    /// Whether region `region` needs more than the fastest step anywhere.
    /// Absent regions count as slow.
    pub fn is_slow(&self, region: u64) -> bool {
        self.entries[region as usize] != [0, 0, 0]
    }

    /// Storage for the table when each entry packs
    /// `ceil(log2(levels))` bits per parameter.
    pub fn storage_bytes(&self) -> u64 {
        let bits: u64 = self.steps.levels().iter().map(|&l| (usize::BITS - (l - 1).leading_zeros()) as u64).sum();
        (self.entries.len() as u64 * bits).div_ceil(8)
    }
}

/// Conservative per-region timings: each parameter is the smallest step at
/// or above the worst requirement in the region, raised by `guardband_steps`
/// and capped at the vendor value.
pub fn build_region_map(
    profile: &LatencyProfile,
    granularity: Granularity,
    steps: &LatencySteps,
    guardband_steps: u32,
) -> Result<RegionMap> {
    let g = *profile.geometry();
    granularity.validate(&g)?;
    let per_region = granularity.lines_per_region(&g) as usize;
    let per_row = g.cachelines_per_row as usize;
    let trcd = profile.line_trcd_ps();
    let (trp, tras) = (profile.row_trp_ps(), profile.row_tras_ps());
    let top = steps.levels().map(|l| (l - 1) as u32);
    let bump = |i: u8, p: usize| (i as u32 + guardband_steps).min(top[p]) as u8;

    let entries = trcd
        .chunks(per_region)
        .enumerate()
        .map(|(r, lines)| {
            let first_row = r * per_region / per_row;
            let rows = per_region.div_ceil(per_row);
            let ps = |v: u16| Latency::from_ps(v as u32);
            let need_rcd = ps(*lines.iter().max().unwrap());
            let need_rp = ps(*trp[first_row..first_row + rows].iter().max().unwrap());
            let need_ras = ps(*tras[first_row..first_row + rows].iter().max().unwrap());
            Ok([
                bump(smallest_step_at_least(&steps.trcd, need_rcd, "tRCD requirement")?, 0),
                bump(smallest_step_at_least(&steps.trp, need_rp, "tRP requirement")?, 1),
                bump(smallest_step_at_least(&steps.tras, need_ras, "tRAS requirement")?, 2),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    RegionMap::from_entries(g, granularity, steps.clone(), entries)
}

/// Timings for the region containing `loc`.
pub fn lookup_timing(map: &RegionMap, loc: &Location) -> Result<TimingParams> {
    let region = map.region_of(loc)?;
    map.region_timing(region)
        .copied()
        .ok_or_else(|| Error::Mapping(format!("region map has no entry for region {region} ({loc})")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Geometry {
        Geometry {
            channels: 1,
            ranks_per_channel: 1,
            banks_per_rank: 2,
            rows_per_bank: 8,
            cachelines_per_row: 16,
            cacheline_bytes: 64,
        }
    }

    fn ns(v: f64) -> Latency {
        Latency::from_ns(v)
    }

    fn all_fast() -> LatencyProfile {
        LatencyProfile::uniform(small(), ns(7.5), ns(7.5), ns(18.0), ns(0.5)).unwrap()
    }

    fn loc(bank: u32, row: u32, cacheline: u32) -> Location {
        Location { channel: 0, rank: 0, bank, row, cacheline }
    }

    #[test]
    fn all_fast_row_map() {
        let map = build_region_map(&all_fast(), Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
        let t = lookup_timing(&map, &loc(1, 3, 5)).unwrap();
        assert_eq!((t.trcd(), t.trp(), t.tras()), (ns(7.5), ns(7.5), ns(27.0)));
        assert_eq!(map.region_count(), 16);
        assert!(lookup_timing(&map, &loc(0, 8, 0)).is_err());
    }

    #[test]
    fn one_slow_line_raises_its_row_only() {
        let mut p = all_fast();
        p.set_line_trcd(&loc(0, 2, 7), ns(9.0)).unwrap();
        let steps = LatencySteps::ddr3_default();
        let map = build_region_map(&p, Granularity::Row, &steps, 0).unwrap();
        assert_eq!(lookup_timing(&map, &loc(0, 2, 0)).unwrap().trcd(), ns(10.0));
        assert_eq!(lookup_timing(&map, &loc(0, 3, 7)).unwrap().trcd(), ns(7.5));

        let groups = build_region_map(&p, Granularity::CachelineGroup(4), &steps, 0).unwrap();
        assert_eq!(lookup_timing(&groups, &loc(0, 2, 4)).unwrap().trcd(), ns(10.0));
        assert_eq!(lookup_timing(&groups, &loc(0, 2, 3)).unwrap().trcd(), ns(7.5));

        let banks = build_region_map(&p, Granularity::Bank, &steps, 0).unwrap();
        assert_eq!(lookup_timing(&banks, &loc(0, 0, 0)).unwrap(), lookup_timing(&banks, &loc(0, 7, 15)).unwrap());
        assert_eq!(lookup_timing(&banks, &loc(1, 0, 0)).unwrap().trcd(), ns(7.5));
    }

    #[test]
    fn guardband_caps_at_spec() {
        let map = build_region_map(&all_fast(), Granularity::Row, &LatencySteps::ddr3_default(), 99).unwrap();
        let spec = TimingParams::ddr3_1333h();
        for r in 0..map.region_count() {
            assert_eq!(map.region_timing(r), Some(&spec));
        }
        let one = build_region_map(&all_fast(), Granularity::Row, &LatencySteps::ddr3_default(), 1).unwrap();
        assert_eq!(one.region_timing(0).unwrap().trcd(), ns(10.0));
        assert_eq!(one.region_timing(0).unwrap().tras(), ns(36.0));
    }

    #[test]
    fn step_validation() {
        let spec = TimingParams::ddr3_1333h();
        let core = vec![ns(7.5), ns(13.125)];
        assert!(LatencySteps::new(spec, vec![], core.clone(), vec![ns(36.0)]).is_err());
        assert!(LatencySteps::new(spec, vec![ns(7.5), ns(10.0)], core.clone(), vec![ns(36.0)]).is_err());
        assert!(LatencySteps::new(spec, vec![ns(10.0), ns(7.5), ns(13.125)], core.clone(), vec![ns(36.0)]).is_err());
        assert!(LatencySteps::new(spec, core.clone(), core, vec![ns(36.0)]).is_ok());
    }

    #[test]
    fn requirement_above_spec_is_error() {
        let p = LatencyProfile::uniform(small(), ns(14.0), ns(7.5), ns(18.0), ns(0.5)).unwrap();
        assert!(matches!(
            build_region_map(&p, Granularity::Row, &LatencySteps::ddr3_default(), 0),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn storage_accounting() {
        let map = build_region_map(&all_fast(), Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
        // 2 + 2 + 1 bits per entry
        assert_eq!(map.storage_bytes(), (16 * 5u64).div_ceil(8));
        assert_eq!(Granularity::Bank.region_count(&Geometry::default()), 16);
    }

    #[test]
    fn granularity_parse() {
        for g in [Granularity::Row, Granularity::Bank, Granularity::CachelineGroup(8)] {
            assert_eq!(g.to_string().parse::<Granularity>().unwrap(), g);
        }
        assert!("cacheline_group:0".parse::<Granularity>().is_err());
        assert!(Granularity::CachelineGroup(3).validate(&small()).is_err());
    }
}
