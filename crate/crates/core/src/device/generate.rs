//! Clustered process-variation generator.
//!
//! Each bank receives `cluster_count` Gaussian bumps in (row, cache line)
//! index space with standard deviation `cluster_radius`. The summed bump
//! field ranks every line of the bank; the top `1 - base_fast_fraction` of
//! lines become slow and receive a tRCD of `7.5 ns + (field - cutoff)`,
//! capped at 10 ns. All other lines sit at the 7.5 ns fast floor and carry
//! no weak bits. Row tRP is the slowest line tRCD of the row and row tRAS
//! scales from 18 ns up to 27 ns with it, so reducing restoration to 27 ns
//! never fails under these defaults.
//!
//! Temperature is deliberately not an input.

use rand::Rng;
use rayon::prelude::*;

use super::profile::{LatencyProfile, WeakBit};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::rng;
use crate::units::Latency;

pub const FAST_FLOOR: Latency = Latency::from_ps(7_500);
pub const SLOW_CAP: Latency = Latency::from_ps(10_000);
pub const TRAS_FLOOR: Latency = Latency::from_ps(18_000);
pub const TRAS_CAP: Latency = Latency::from_ps(27_000);

const GEN_KEY: u64 = 0x0067_656e;

/// Knobs of the clustered variation model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariationParams {
    /// Gaussian bumps per bank.
    pub cluster_count: u32,
    /// Bump standard deviation in row / cache-line index units.
    pub cluster_radius: f64,
    /// Peak height of a bump before per-cluster scaling, in ns.
    pub cluster_depth_ns: f64,
    /// Fraction of cache lines left at the fast floor.
    pub base_fast_fraction: f64,
    /// Extra threshold of a weak bit that stores a zero.
    pub pattern_penalty_ns: f64,
    /// Standard deviation of per-read threshold noise.
    pub jitter_sigma_ns: f64,
}

impl Default for VariationParams {
    fn default() -> Self {
        VariationParams {
            cluster_count: 4,
            cluster_radius: 24.0,
            cluster_depth_ns: 3.0,
            base_fast_fraction: 0.95,
            pattern_penalty_ns: 0.5,
            jitter_sigma_ns: 0.0,
        }
    }
}

impl VariationParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_fast_fraction) {
            return Err(Error::param("base_fast_fraction must lie in [0, 1]"));
        }
        for (name, v) in [
            ("cluster_radius", self.cluster_radius),
            ("cluster_depth_ns", self.cluster_depth_ns),
            ("pattern_penalty_ns", self.pattern_penalty_ns),
            ("jitter_sigma_ns", self.jitter_sigma_ns),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(format!("{name} must be a finite value >= 0")));
            }
        }
        if self.cluster_count > 0 && self.cluster_radius == 0.0 {
            return Err(Error::param("cluster_radius must be positive when clusters exist"));
        }
        if self.pattern_penalty_ns > 50.0 {
            return Err(Error::param("pattern_penalty_ns must be <= 50"));
        }
        Ok(())
    }
}

struct BankTables {
    trcd: Vec<u16>,
    trp: Vec<u16>,
    tras: Vec<u16>,
    weak: Vec<WeakBit>,
}

pub fn generate_profile(geometry: &Geometry, params: &VariationParams, seed: u64) -> Result<LatencyProfile> {
    geometry.validate()?;
    params.validate()?;
    let penalty = Latency::from_ns(params.pattern_penalty_ns);

    let banks: Vec<BankTables> = (0..geometry.total_banks())
        .into_par_iter()
        .map(|bank| generate_bank(geometry, params, penalty, seed, bank))
        .collect();

    let mut trcd = Vec::with_capacity(geometry.total_lines() as usize);
    let mut trp = Vec::with_capacity(geometry.total_rows() as usize);
    let mut tras = Vec::with_capacity(geometry.total_rows() as usize);
    let mut weak = Vec::new();
    for b in banks {
        trcd.extend_from_slice(&b.trcd);
        trp.extend_from_slice(&b.trp);
        tras.extend_from_slice(&b.tras);
        weak.extend_from_slice(&b.weak);
    }
    LatencyProfile::from_raw(*geometry, trcd, trp, tras, weak, penalty, params.jitter_sigma_ns, seed)
}

fn generate_bank(g: &Geometry, params: &VariationParams, penalty: Latency, seed: u64, bank: u64) -> BankTables {
    let mut rng = rng::stream(seed, &[GEN_KEY, bank]);
    let rows = g.rows_per_bank as usize;
    let lines = g.cachelines_per_row as usize;
    let n = rows * lines;

    let field = cluster_field(g, params, &mut rng);
    let slow_count = ((1.0 - params.base_fast_fraction) * n as f64).round() as usize;
    let cutoff = match &field {
        Some(f) if slow_count > 0 => Some(cutoff_for(f, slow_count)),
        _ => None,
    };

    let fast = FAST_FLOOR.ps() as u16;
    let mut trcd = vec![fast; n];
    if let (Some(f), Some(cut)) = (&field, cutoff) {
        for (t, &v) in trcd.iter_mut().zip(f) {
            if v > cut {
                let raised = FAST_FLOOR.ps() as f64 + ((v - cut) * 1000.0).round();
                *t = raised.clamp(FAST_FLOOR.ps() as f64 + 1.0, SLOW_CAP.ps() as f64) as u16;
            }
        }
    }

    let span = (SLOW_CAP.ps() - FAST_FLOOR.ps()) as f64;
    let tras_span = (TRAS_CAP.ps() - TRAS_FLOOR.ps()) as f64;
    let mut trp = Vec::with_capacity(rows);
    let mut tras = Vec::with_capacity(rows);
    for row in trcd.chunks(lines) {
        let worst = *row.iter().max().expect("rows are non-empty");
        trp.push(worst);
        let severity = (worst as f64 - FAST_FLOOR.ps() as f64).max(0.0) / span;
        let t = TRAS_FLOOR.ps() as f64 + (severity * tras_span).round();
        tras.push(t.min(TRAS_CAP.ps() as f64) as u16);
    }

    let base_line = bank * g.lines_per_bank();
    let bits = g.bits_per_line();
    let mut weak = Vec::new();
    for (i, &t) in trcd.iter().enumerate() {
        if t > fast {
            push_weak_bits(&mut weak, &mut rng, (base_line + i as u64) as u32, bits, penalty);
        }
    }

    BankTables { trcd, trp, tras, weak }
}

/// Summed bump heights for every line of one bank, row-major.
fn cluster_field(g: &Geometry, params: &VariationParams, rng: &mut impl Rng) -> Option<Vec<f64>> {
    if params.cluster_count == 0 || params.cluster_depth_ns == 0.0 {
        return None;
    }
    let rows = g.rows_per_bank as usize;
    let lines = g.cachelines_per_row as usize;
    let two_var = 2.0 * params.cluster_radius * params.cluster_radius;

    // Gaussians are separable: keep per-cluster row and column factors.
    let mut row_factors = Vec::with_capacity(params.cluster_count as usize);
    let mut col_factors = Vec::with_capacity(params.cluster_count as usize);
    for _ in 0..params.cluster_count {
        let center_row = rng.random_range(0.0..rows as f64);
        let center_col = rng.random_range(0.0..lines as f64);
        let depth = params.cluster_depth_ns * rng.random_range(0.5..=1.0);
        row_factors
            .push((0..rows).map(|r| depth * (-(r as f64 - center_row).powi(2) / two_var).exp()).collect::<Vec<_>>());
        col_factors.push((0..lines).map(|c| (-(c as f64 - center_col).powi(2) / two_var).exp()).collect::<Vec<_>>());
    }

    let mut field = vec![0.0; rows * lines];
    for (r, out) in field.chunks_mut(lines).enumerate() {
        for (rf, cf) in row_factors.iter().zip(&col_factors) {
            let w = rf[r];
            if w == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(cf) {
                *o += w * c;
            }
        }
    }
    Some(field)
}

/// Largest value such that exactly `slow` entries lie strictly above it,
/// barring ties.
fn cutoff_for(field: &[f64], slow: usize) -> f64 {
    let n = field.len();
    if slow >= n {
        let min = field.iter().copied().fold(f64::INFINITY, f64::min);
        return min - 1e-9;
    }
    let mut scratch = field.to_vec();
    let (_, nth, _) = scratch.select_nth_unstable_by(n - slow - 1, |a, b| a.total_cmp(b));
    *nth
}

/// One dominant bit failing exactly at the line threshold plus up to three
/// stragglers with larger margins.
fn push_weak_bits(out: &mut Vec<WeakBit>, rng: &mut impl Rng, line: u32, bits: u32, penalty: Latency) {
    let u: f64 = rng.random();
    let extras = match u {
        u if u < 0.55 => 0,
        u if u < 0.85 => 1,
        u if u < 0.97 => 2,
        _ => 3,
    }
    .min(bits.saturating_sub(1));

    let start = out.len();
    let dominant = rng.random_range(0..bits) as u16;
    out.push(WeakBit { line, bit: dominant, margin: penalty });
    while out.len() - start < 1 + extras as usize {
        let bit = rng.random_range(0..bits) as u16;
        if out[start..].iter().any(|w| w.bit == bit) {
            continue;
        }
        let gap = rng.random_range(0.25..4.0);
        let margin = penalty + Latency::from_ns(gap).max(Latency::from_ps(1));
        out.push(WeakBit { line, bit, margin });
    }
    out[start..].sort_unstable();
}
