use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::ecc::{secded_decode, secded_encode, BeatHistogram, SecdedOutcome};
use crate::device::{AppliedTimings, DataPattern, LatencyProfile, TimingParams};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Location};
use crate::rng;
use crate::units::Latency;

const SWEEP_KEY: u64 = 0x0053_5745_4550;

/// The timing parameter a sweep point reduces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Trcd,
    Trp,
    Tras,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::Trcd, Param::Trp, Param::Tras];

    fn key(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::Trcd => "trcd",
            Param::Trp => "trp",
            Param::Tras => "tras",
        })
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trcd" => Ok(Param::Trcd),
            "trp" => Ok(Param::Trp),
            "tras" => Ok(Param::Tras),
            other => Err(Error::param(format!("unknown timing parameter `{other}`"))),
        }
    }
}

/// Latencies, data patterns and repetitions of a characterization run.
///
/// Unswept parameters stay at `baseline`. A parameter with an empty list is
/// not swept.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub trcd_values: Vec<Latency>,
    pub trp_values: Vec<Latency>,
    pub tras_values: Vec<Latency>,
    pub patterns: Vec<DataPattern>,
    pub rounds: u32,
    pub baseline: TimingParams,
}

fn ns_list(v: &[u32]) -> Vec<Latency> {
    v.iter().map(|&ps| Latency::from_ps(ps)).collect()
}

impl Default for SweepConfig {
    /// tRCD and tRP over {2.5, 5, 7.5, 10, 12.5, 13.125} ns, tRAS over
    /// {18, 27, 36} ns, the five default patterns, three rounds.
    fn default() -> Self {
        let core = ns_list(&[2_500, 5_000, 7_500, 10_000, 12_500, 13_125]);
        SweepConfig {
            trcd_values: core.clone(),
            trp_values: core,
            tras_values: ns_list(&[18_000, 27_000, 36_000]),
            patterns: DataPattern::defaults(),
            rounds: 3,
            baseline: TimingParams::ddr3_1333h(),
        }
    }
}

impl SweepConfig {
    /// Sweep of a single parameter.
    pub fn only(param: Param, values: Vec<Latency>) -> Self {
        let mut s = SweepConfig {
            trcd_values: Vec::new(),
            trp_values: Vec::new(),
            tras_values: Vec::new(),
            ..SweepConfig::default()
        };
        *s.values_mut(param) = values;
        s
    }

    pub fn values(&self, param: Param) -> &[Latency] {
        match param {
            Param::Trcd => &self.trcd_values,
            Param::Trp => &self.trp_values,
            Param::Tras => &self.tras_values,
        }
    }

    pub fn values_mut(&mut self, param: Param) -> &mut Vec<Latency> {
        match param {
            Param::Trcd => &mut self.trcd_values,
            Param::Trp => &mut self.trp_values,
            Param::Tras => &mut self.tras_values,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in Param::ALL {
            let v = self.values(p);
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param(format!("{p} values must be strictly ascending")));
            }
            if v.first() == Some(&Latency::ZERO) {
                return Err(Error::param(format!("{p} values must be positive")));
            }
        }
        if Param::ALL.iter().all(|&p| self.values(p).is_empty()) {
            return Err(Error::param("sweep has no latency values"));
        }
        if self.patterns.is_empty() {
            return Err(Error::param("sweep has no data patterns"));
        }
        if self.rounds == 0 {
            return Err(Error::param("rounds must be at least 1"));
        }
        Ok(())
    }

    /// Every swept (parameter, value), in parameter then ascending order.
    pub fn points(&self) -> Vec<SweepPoint> {
        Param::ALL
            .iter()
            .flat_map(|&param| self.values(param).iter().map(move |&value| SweepPoint { param, value }))
            .collect()
    }

    fn applied(&self, point: SweepPoint) -> AppliedTimings {
        let mut a = AppliedTimings::from(&self.baseline);
        match point.param {
            Param::Trcd => a.trcd = point.value,
            Param::Trp => a.trp = point.value,
            Param::Tras => a.tras = point.value,
        }
        a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SweepPoint {
    pub param: Param,
    pub value: Latency,
}

/// `errors / tested`.
pub fn compute_ber(errors: u64, tested: u64) -> Result<f64> {
    if tested == 0 {
        return Err(Error::param("no bits tested"));
    }
    if errors > tested {
        return Err(Error::param(format!("{errors} errors exceed {tested} bits tested")));
    }
    Ok(errors as f64 / tested as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerRow {
    pub param: Param,
    pub value: Latency,
    pub pattern: DataPattern,
    pub round: u32,
    pub bit_errors: u64,
    pub bits_tested: u64,
}

impl BerRow {
    pub fn ber(&self) -> f64 {
        compute_ber(self.bit_errors, self.bits_tested).expect("rows always test bits")
    }
}

/// Rows in (parameter, value, pattern, round) sweep order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BerTable {
    pub rows: Vec<BerRow>,
}

impl BerTable {
    /// Aggregate BER of `pattern` at `point` over all rounds.
    pub fn ber_at(&self, point: SweepPoint, pattern: DataPattern) -> Option<f64> {
        let (e, t) = self
            .rows
            .iter()
            .filter(|r| r.param == point.param && r.value == point.value && r.pattern == pattern)
            .fold((0, 0), |(e, t), r| (e + r.bit_errors, t + r.bits_tested));
        (t > 0).then(|| e as f64 / t as f64)
    }

    pub fn total_errors(&self) -> u64 {
        self.rows.iter().map(|r| r.bit_errors).sum()
    }
}

/// Sparse per-line error-observation counts for one sweep point.
///
/// A cell's probability is the fraction of (pattern, round) trials in which
/// the line returned at least one flipped bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorMap {
    geometry: Geometry,
    trials: u32,
    cells: Vec<(u32, u32)>,
}

impl ErrorMap {
    /// `cells` holds (global line index, trials with errors), any order.
    pub fn from_counts(geometry: Geometry, trials: u32, mut cells: Vec<(u32, u32)>) -> Result<Self> {
        geometry.validate()?;
        if trials == 0 {
            return Err(Error::param("error map needs at least one trial"));
        }
        cells.retain(|&(_, c)| c > 0);
        cells.sort_unstable();
        if cells.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("duplicate error-map cell"));
        }
        if let Some(&(line, count)) = cells.iter().find(|&&(l, c)| l as u64 >= geometry.total_lines() || c > trials) {
            return Err(Error::param(format!("error-map cell {line} with count {count} out of range")));
        }
        Ok(ErrorMap { geometry, trials, cells })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn trials(&self) -> u32 {
        self.trials
    }

    /// Cells with a nonzero count as (global line index, count).
    pub fn cells(&self) -> &[(u32, u32)] {
        &self.cells
    }

    pub fn probability(&self, loc: &Location) -> Result<f64> {
        self.geometry.check(loc)?;
        let line = self.geometry.line_index(loc) as u32;
        Ok(match self.cells.binary_search_by_key(&line, |c| c.0) {
            Ok(i) => self.cells[i].1 as f64 / self.trials as f64,
            Err(_) => 0.0,
        })
    }

    /// Nonzero cells as (location, probability).
    pub fn nonzero(&self) -> impl Iterator<Item = (Location, f64)> + '_ {
        self.cells.iter().map(|&(l, c)| (self.geometry.line_location(l as u64), c as f64 / self.trials as f64))
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Dense row-major (row x cache line) probability grid of one bank,
    /// `bank` being the global bank index.
    pub fn bank_grid(&self, bank: u64) -> Result<Vec<f64>> {
        if bank >= self.geometry.total_banks() {
            return Err(Error::Address(format!("bank {bank} outside geometry")));
        }
        let per = self.geometry.lines_per_bank();
        let mut grid = vec![0.0; per as usize];
        let lo = self.cells.partition_point(|c| (c.0 as u64) < bank * per);
        for &(l, c) in self.cells[lo..].iter().take_while(|c| (c.0 as u64) < (bank + 1) * per) {
            grid[(l as u64 - bank * per) as usize] = c as f64 / self.trials as f64;
        }
        Ok(grid)
    }
}

/// Results for one sweep point, aggregated over patterns and rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub point: SweepPoint,
    pub error_map: ErrorMap,
    /// Flipped bits per 64-bit beat over every line read.
    pub beats: BeatHistogram,
    /// Erroneous beats a SECDED decoder restored to the written data.
    pub secded_corrected: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Characterization {
    pub table: BerTable,
    pub points: Vec<PointResult>,
}

impl Characterization {
    pub fn point(&self, param: Param, value: Latency) -> Option<&PointResult> {
        self.points.iter().find(|p| p.point == SweepPoint { param, value })
    }
}

struct TaskResult {
    bit_errors: u64,
    erroneous_lines: Vec<u32>,
    beats: BeatHistogram,
    secded_corrected: u64,
}

/// One trial: write `pattern`, then read every line under the point's
/// timings.
///
/// tRCD tests activate each line's row and read that line first. tRP tests
/// precharge short, activate, and read the whole row. tRAS tests close the
/// row early, reopen it at baseline timings, and read the whole row. Only
/// lines with weak bits can flip, so only those are visited.
fn run_task(
    profile: &LatencyProfile,
    sweep: &SweepConfig,
    point: SweepPoint,
    pattern: DataPattern,
    seed: u64,
) -> TaskResult {
    let g = profile.geometry();
    let applied = sweep.applied(point);
    let mut rng = rng::stream(seed, &[SWEEP_KEY]);
    let beat_words = g.bits_per_line().div_ceil(64);
    let mut result =
        TaskResult { bit_errors: 0, erroneous_lines: Vec::new(), beats: BeatHistogram::new(64), secded_corrected: 0 };
    let mut flips = vec![0u64; beat_words as usize];
    let mut erroneous_beats = 0u64;

    for line in profile.weak_lines() {
        let row = line / g.cachelines_per_row as u64;
        let first_read = match point.param {
            Param::Trcd => true,
            Param::Trp | Param::Tras => line % g.cachelines_per_row as u64 == 0,
        };
        flips.iter_mut().for_each(|w| *w = 0);
        let mut any = false;
        profile.for_each_flip(
            line,
            row,
            &applied,
            first_read,
            |b| pattern.bit(line, b),
            &mut rng,
            |b| {
                flips[(b / 64) as usize] |= 1 << (b % 64);
                any = true;
            },
        );
        if !any {
            continue;
        }
        result.erroneous_lines.push(line as u32);
        for (w, &mask) in flips.iter().enumerate() {
            let n = mask.count_ones();
            if n == 0 {
                continue;
            }
            result.bit_errors += n as u64;
            result.beats.add(n, 1);
            erroneous_beats += 1;
            let written = pattern.word(line, w as u32);
            if secded_decode(written ^ mask, secded_encode(written)) == SecdedOutcome::Corrected(written) {
                result.secded_corrected += 1;
            }
        }
    }
    result.beats.add(0, g.total_lines() * beat_words as u64 - erroneous_beats);
    result
}

/// Sweeps `sweep` over `profile`. Trials are independent and run in
/// parallel, each with its own rng stream derived from `seed`, so results do
/// not depend on thread count.
pub fn run_characterization(profile: &LatencyProfile, sweep: &SweepConfig, seed: u64) -> Result<Characterization> {
    sweep.validate()?;
    let g = *profile.geometry();
    if !g.bits_per_line().is_multiple_of(64) {
        return Err(Error::param("characterization needs lines made of whole 64-bit beats"));
    }
    let points = sweep.points();
    let tasks: Vec<(usize, usize, u32)> = (0..points.len())
        .flat_map(|p| (0..sweep.patterns.len()).flat_map(move |pat| (0..sweep.rounds).map(move |r| (p, pat, r))))
        .collect();
    let results: Vec<TaskResult> = tasks
        .par_iter()
        .map(|&(p, pat, round)| {
            let point = points[p];
            let task_seed =
                rng::derive_seed(seed, &[point.param.key(), point.value.ps() as u64, pat as u64, round as u64]);
            run_task(profile, sweep, point, sweep.patterns[pat], task_seed)
        })
        .collect();

    let bits_tested = g.total_lines() * g.bits_per_line() as u64;
    let trials = sweep.patterns.len() as u32 * sweep.rounds;
    let mut table = BerTable::default();
    let mut per_point: Vec<(Vec<u32>, BeatHistogram, u64)> =
        points.iter().map(|_| (Vec::new(), BeatHistogram::new(64), 0)).collect();
    for (&(p, pat, round), r) in tasks.iter().zip(results) {
        table.rows.push(BerRow {
            param: points[p].param,
            value: points[p].value,
            pattern: sweep.patterns[pat],
            round,
            bit_errors: r.bit_errors,
            bits_tested,
        });
        let acc = &mut per_point[p];
        acc.0.extend(r.erroneous_lines);
        acc.1.merge(&r.beats);
        acc.2 += r.secded_corrected;
    }
    let points = points
        .into_iter()
        .zip(per_point)
        .map(|(point, (mut lines, beats, secded_corrected))| {
            lines.sort_unstable();
            let mut cells: Vec<(u32, u32)> = Vec::new();
            for l in lines {
                match cells.last_mut() {
                    Some(c) if c.0 == l => c.1 += 1,
                    _ => cells.push((l, 1)),
                }
            }
            Ok(PointResult { point, error_map: ErrorMap::from_counts(g, trials, cells)?, beats, secded_corrected })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Characterization { table, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{generate_profile, inject_read_errors, AccessContext, VariationParams};
    use crate::profiler::beat_error_histogram;

    fn small() -> Geometry {
        Geometry {
            channels: 1,
            ranks_per_channel: 1,
            banks_per_rank: 2,
            rows_per_bank: 96,
            cachelines_per_row: 64,
            cacheline_bytes: 64,
        }
    }

    fn clustered(seed: u64) -> LatencyProfile {
        let params = VariationParams { cluster_radius: 8.0, ..Default::default() };
        generate_profile(&small(), &params, seed).unwrap()
    }

    #[test]
    fn ber_arithmetic() {
        assert_eq!(compute_ber(0, 1_000_000).unwrap(), 0.0);
        assert_eq!(compute_ber(1, 64).unwrap(), 0.015625);
        assert!(compute_ber(1, 0).is_err());
        assert!(compute_ber(65, 64).is_err());
    }

    #[test]
    fn sweep_validation() {
        let mut s = SweepConfig::default();
        assert!(s.validate().is_ok());
        s.trcd_values = ns_list(&[10_000, 7_500]);
        assert!(s.validate().is_err());
        s = SweepConfig::default();
        s.rounds = 0;
        assert!(s.validate().is_err());
        assert!(SweepConfig::only(Param::Trcd, vec![]).validate().is_err());
    }

    #[test]
    fn guardband_and_clustered_errors() {
        let p = clustered(1);
        let sweep = SweepConfig::only(Param::Trcd, ns_list(&[7_500, 10_000, 12_500]));
        let c = run_characterization(&p, &sweep, 9).unwrap();
        for row in &c.table.rows {
            if row.value >= Latency::from_ps(10_000) {
                assert_eq!(row.bit_errors, 0);
            }
        }
        let at75 = c.point(Param::Trcd, Latency::from_ps(7_500)).unwrap();
        assert!(!at75.error_map.is_empty());
        for &(line, _) in at75.error_map.cells() {
            assert!(p.line_trcd_at(line as u64) > Latency::from_ps(7_500));
        }
    }

    #[test]
    fn rounds_identical_without_jitter() {
        let p = clustered(2);
        let mut sweep = SweepConfig::only(Param::Trcd, ns_list(&[7_500]));
        sweep.rounds = 3;
        let c = run_characterization(&p, &sweep, 4).unwrap();
        for pat in sweep.patterns.iter() {
            let counts: Vec<u64> = c.table.rows.iter().filter(|r| r.pattern == *pat).map(|r| r.bit_errors).collect();
            assert!(counts.windows(2).all(|w| w[0] == w[1]));
        }
        assert_eq!(c, run_characterization(&p, &sweep, 4).unwrap());
    }

    /// Recount every trial with full bitmaps from the public read model.
    #[test]
    fn aggregates_match_bruteforce_recount() {
        let p = clustered(3);
        let g = small();
        let mut sweep = SweepConfig::only(Param::Trcd, ns_list(&[7_500]));
        sweep.patterns = vec![DataPattern::AllZeros, DataPattern::Random(7)];
        sweep.rounds = 1;
        let c = run_characterization(&p, &sweep, 4).unwrap();
        let mut bitmaps = Vec::new();
        let mut per_line = vec![0u32; g.total_lines() as usize];
        let mut rng = rng::stream(0, &[]);
        for pat in &sweep.patterns {
            for line in 0..g.total_lines() {
                let stored = pat.fill(line, g.bits_per_line());
                let ctx = AccessContext {
                    applied: sweep.applied(SweepPoint { param: Param::Trcd, value: Latency::from_ps(7_500) }),
                    first_read_after_activate: true,
                    stored: &stored,
                    location: g.line_location(line),
                };
                let (_, errors) = inject_read_errors(&p, &ctx, &mut rng).unwrap();
                if errors.count_ones() > 0 {
                    per_line[line as usize] += 1;
                }
                bitmaps.push(errors);
            }
        }
        let total: u64 = bitmaps.iter().map(|b| b.count_ones()).sum();
        assert_eq!(total, c.table.total_errors());
        let pr = &c.points[0];
        assert_eq!(beat_error_histogram(&bitmaps, 64).unwrap(), pr.beats);
        assert_eq!(pr.secded_corrected, pr.beats.freq(1));
        for (line, &n) in per_line.iter().enumerate() {
            let loc = g.line_location(line as u64);
            assert_eq!(pr.error_map.probability(&loc).unwrap(), n as f64 / 2.0);
        }
    }

    #[test]
    fn error_map_grid() {
        let g = small();
        let m = ErrorMap::from_counts(g, 4, vec![(5, 2), (g.lines_per_bank() as u32 + 1, 4)]).unwrap();
        assert_eq!(m.bank_grid(0).unwrap()[5], 0.5);
        assert_eq!(m.bank_grid(1).unwrap()[1], 1.0);
        assert!(m.bank_grid(2).is_err());
        assert!(ErrorMap::from_counts(g, 4, vec![(1, 5)]).is_err());
    }
}
