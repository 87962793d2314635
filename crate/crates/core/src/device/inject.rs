//! Threshold error model.
//!
//! A weak bit flips on a read when its effective threshold, namely
//!
//! ```text
//! base - margin + (stored == 0 ? pattern_penalty : 0) + N(0, jitter_sigma)
//! ```
//!
//! exceeds the latency that was actually granted. The base is the line's
//! tRCD (checked only on the first read after an activation), the row's tRP
//! (against the precharge preceding the activation) and the row's tRAS
//! (against the restoration window of the row's last closing). One jitter
//! sample is drawn per weak bit per read, and only when sigma is positive.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::data::DataBits;
use super::params::TimingParams;
use super::profile::LatencyProfile;
use crate::error::{Error, Result};
use crate::geometry::Location;
use crate::units::Latency;

/// Latencies actually granted to the access being checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AppliedTimings {
    /// ACT to this read.
    pub trcd: Latency,
    /// PRE to the ACT that opened the row.
    pub trp: Latency,
    /// ACT to PRE when the row was last closed.
    pub tras: Latency,
}

impl From<&TimingParams> for AppliedTimings {
    fn from(t: &TimingParams) -> Self {
        AppliedTimings { trcd: t.trcd(), trp: t.trp(), tras: t.tras() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AccessContext<'a> {
    pub applied: AppliedTimings,
    pub first_read_after_activate: bool,
    pub stored: &'a DataBits,
    pub location: Location,
}

impl LatencyProfile {
    /// Calls `on_flip(bit)` for every bit of line `line` (in row `row`) that
    /// flips, in ascending bit order. `stored(bit)` gives the stored value.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn for_each_flip<R, S, F>(
        &self,
        line: u64,
        row: u64,
        applied: &AppliedTimings,
        first_read: bool,
        stored: S,
        rng: &mut R,
        mut on_flip: F,
    ) where
        R: Rng + ?Sized,
        S: Fn(u32) -> bool,
        F: FnMut(u32),
    {
        let weak = self.weak_bits_at(line);
        if weak.is_empty() {
            return;
        }
        let trcd = self.line_trcd_at(line).ps() as f64;
        let trp = self.row_trp_at(row).ps() as f64;
        let tras = self.row_tras_at(row).ps() as f64;
        let penalty = self.pattern_penalty().ps() as f64;
        let noise = (self.jitter_sigma_ns() > 0.0)
            .then(|| Normal::new(0.0, self.jitter_sigma_ns() * 1000.0).expect("sigma validated"));

        for w in weak {
            let bit = w.bit as u32;
            let mut adj = -(w.margin.ps() as f64);
            if !stored(bit) {
                adj += penalty;
            }
            if let Some(n) = &noise {
                adj += n.sample(rng);
            }
            let flips = (first_read && trcd + adj > applied.trcd.ps() as f64)
                || trp + adj > applied.trp.ps() as f64
                || tras + adj > applied.tras.ps() as f64;
            if flips {
                on_flip(bit);
            }
        }
    }
}

/// Reads the line described by `ctx`, returning the data seen by the
/// controller and the bitmap of flipped bits (`returned ^ stored`).
pub fn inject_read_errors<R: Rng + ?Sized>(
    profile: &LatencyProfile,
    ctx: &AccessContext<'_>,
    rng: &mut R,
) -> Result<(DataBits, DataBits)> {
    let g = profile.geometry();
    g.check(&ctx.location)?;
    if ctx.stored.len() != g.bits_per_line() {
        return Err(Error::param(format!(
            "stored data has {} bits, lines hold {}",
            ctx.stored.len(),
            g.bits_per_line()
        )));
    }
    let mut errors = DataBits::zeros(g.bits_per_line());
    profile.for_each_flip(
        g.line_index(&ctx.location),
        g.row_index(&ctx.location),
        &ctx.applied,
        ctx.first_read_after_activate,
        |b| ctx.stored.get(b),
        rng,
        |b| errors.flip(b),
    );
    let returned = ctx.stored.xor(&errors);
    Ok((returned, errors))
}
