use crate::error::{Error, Result};
use crate::geometry::{Geometry, Location};
use crate::units::Latency;

/// Which fundamental operation a threshold governs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    /// ACT to first column read (tRCD), per cache line.
    Activation,
    /// PRE to ACT (tRP), per row.
    Precharge,
    /// ACT to PRE (tRAS), per row.
    Restoration,
}

/// A bit that fails before the rest of its line.
///
/// Its threshold is the line (or row) base threshold minus `margin`, plus the
/// profile's pattern penalty when the bit stores a zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeakBit {
    pub line: u32,
    pub bit: u16,
    pub margin: Latency,
}

/// Simulated ground truth for one module: the minimum reliable tRCD of every
/// cache line, tRP and tRAS of every row, and the sparse set of weak bits.
///
/// Invariant: every weak bit's margin is at least `pattern_penalty`, so a
/// location accessed at or above its minimum thresholds never flips,
/// whatever data it stores. Bits without a weak-bit entry never fail.
#[derive(Clone, Debug, PartialEq)]
pub struct LatencyProfile {
    geometry: Geometry,
    line_trcd: Vec<u16>,
    row_trp: Vec<u16>,
    row_tras: Vec<u16>,
    weak: Vec<WeakBit>,
    pattern_penalty: Latency,
    jitter_sigma_ns: f64,
    seed: u64,
}

fn to_u16(l: Latency, what: &str) -> Result<u16> {
    if l == Latency::ZERO {
        return Err(Error::param(format!("{what} must be positive")));
    }
    u16::try_from(l.ps()).map_err(|_| Error::param(format!("{what} {l} ns exceeds 65.535 ns")))
}

impl LatencyProfile {
    /// Every line and row at the given thresholds, with no weak bits.
    pub fn uniform(
        geometry: Geometry,
        trcd: Latency,
        trp: Latency,
        tras: Latency,
        pattern_penalty: Latency,
    ) -> Result<Self> {
        geometry.validate()?;
        Ok(LatencyProfile {
            geometry,
            line_trcd: vec![to_u16(trcd, "min_trcd")?; geometry.total_lines() as usize],
            row_trp: vec![to_u16(trp, "min_trp")?; geometry.total_rows() as usize],
            row_tras: vec![to_u16(tras, "min_tras")?; geometry.total_rows() as usize],
            weak: Vec::new(),
            pattern_penalty,
            jitter_sigma_ns: 0.0,
            seed: 0,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_raw(
        geometry: Geometry,
        line_trcd: Vec<u16>,
        row_trp: Vec<u16>,
        row_tras: Vec<u16>,
        mut weak: Vec<WeakBit>,
        pattern_penalty: Latency,
        jitter_sigma_ns: f64,
        seed: u64,
    ) -> Result<Self> {
        geometry.validate()?;
        if line_trcd.len() as u64 != geometry.total_lines()
            || row_trp.len() as u64 != geometry.total_rows()
            || row_tras.len() as u64 != geometry.total_rows()
        {
            return Err(Error::param("threshold tables do not match geometry"));
        }
        if line_trcd.iter().chain(&row_trp).chain(&row_tras).any(|&v| v == 0) {
            return Err(Error::param("thresholds must be positive"));
        }
        if !(jitter_sigma_ns.is_finite() && jitter_sigma_ns >= 0.0) {
            return Err(Error::param("jitter_sigma_ns must be >= 0"));
        }
        weak.sort_unstable();
        for w in &weak {
            Self::check_weak(&geometry, pattern_penalty, w)?;
        }
        if weak.windows(2).any(|p| (p[0].line, p[0].bit) == (p[1].line, p[1].bit)) {
            return Err(Error::param("duplicate weak bit"));
        }
        Ok(LatencyProfile { geometry, line_trcd, row_trp, row_tras, weak, pattern_penalty, jitter_sigma_ns, seed })
    }

    fn check_weak(geometry: &Geometry, penalty: Latency, w: &WeakBit) -> Result<()> {
        if w.line as u64 >= geometry.total_lines() {
            return Err(Error::Address(format!("weak bit line {} outside geometry", w.line)));
        }
        if w.bit as u32 >= geometry.bits_per_line() {
            return Err(Error::param(format!("weak bit index {} >= line width", w.bit)));
        }
        if w.margin < penalty {
            return Err(Error::param(format!("weak bit margin {} ns below pattern penalty {} ns", w.margin, penalty)));
        }
        Ok(())
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn pattern_penalty(&self) -> Latency {
        self.pattern_penalty
    }

    pub fn jitter_sigma_ns(&self) -> f64 {
        self.jitter_sigma_ns
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_jitter_sigma_ns(&mut self, sigma: f64) -> Result<()> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::param("jitter_sigma_ns must be >= 0"));
        }
        self.jitter_sigma_ns = sigma;
        Ok(())
    }

    /// Minimum reliable latency for `kind` at `loc`: per cache line for
    /// activation, per row for precharge and restoration.
    pub fn required_timing(&self, loc: &Location, kind: OpKind) -> Result<Latency> {
        self.geometry.check(loc)?;
        Ok(match kind {
            OpKind::Activation => self.line_trcd_at(self.geometry.line_index(loc)),
            OpKind::Precharge => self.row_trp_at(self.geometry.row_index(loc)),
            OpKind::Restoration => self.row_tras_at(self.geometry.row_index(loc)),
        })
    }

    pub(crate) fn line_trcd_at(&self, line: u64) -> Latency {
        Latency::from_ps(self.line_trcd[line as usize] as u32)
    }

    pub(crate) fn row_trp_at(&self, row: u64) -> Latency {
        Latency::from_ps(self.row_trp[row as usize] as u32)
    }

    pub(crate) fn row_tras_at(&self, row: u64) -> Latency {
        Latency::from_ps(self.row_tras[row as usize] as u32)
    }

    /// Per-line tRCD thresholds in picoseconds, indexed by global line.
    pub(crate) fn line_trcd_ps(&self) -> &[u16] {
        &self.line_trcd
    }

    pub(crate) fn row_trp_ps(&self) -> &[u16] {
        &self.row_trp
    }

    pub(crate) fn row_tras_ps(&self) -> &[u16] {
        &self.row_tras
    }

    /// Weak bits of the line with global index `line`, ordered by bit index.
    pub fn weak_bits_at(&self, line: u64) -> &[WeakBit] {
        let line = line as u32;
        let lo = self.weak.partition_point(|w| w.line < line);
        let hi = lo + self.weak[lo..].partition_point(|w| w.line == line);
        &self.weak[lo..hi]
    }

    pub fn weak_bits(&self, loc: &Location) -> Result<&[WeakBit]> {
        self.geometry.check(loc)?;
        Ok(self.weak_bits_at(self.geometry.line_index(loc)))
    }

    /// All weak bits, sorted by (line, bit).
    pub fn all_weak_bits(&self) -> &[WeakBit] {
        &self.weak
    }

    /// Global indices of lines that have at least one weak bit.
    pub fn weak_lines(&self) -> impl Iterator<Item = u64> + '_ {
        let mut last = None;
        self.weak.iter().filter_map(move |w| {
            if last == Some(w.line) {
                None
            } else {
                last = Some(w.line);
                Some(w.line as u64)
            }
        })
    }

    /// Maximum of `kind`'s threshold over all locations.
    pub fn max_required(&self, kind: OpKind) -> Latency {
        let table = match kind {
            OpKind::Activation => &self.line_trcd,
            OpKind::Precharge => &self.row_trp,
            OpKind::Restoration => &self.row_tras,
        };
        Latency::from_ps(table.iter().copied().max().unwrap_or(0) as u32)
    }

    pub fn set_line_trcd(&mut self, loc: &Location, trcd: Latency) -> Result<()> {
        self.geometry.check(loc)?;
        let i = self.geometry.line_index(loc) as usize;
        self.line_trcd[i] = to_u16(trcd, "min_trcd")?;
        Ok(())
    }

    pub fn set_row(&mut self, loc: &Location, trp: Latency, tras: Latency) -> Result<()> {
        self.geometry.check(loc)?;
        let i = self.geometry.row_index(loc) as usize;
        self.row_trp[i] = to_u16(trp, "min_trp")?;
        self.row_tras[i] = to_u16(tras, "min_tras")?;
        Ok(())
    }

    /// Adds or replaces the weak bit `bit` of the line at `loc`.
    pub fn add_weak_bit(&mut self, loc: &Location, bit: u16, margin: Latency) -> Result<()> {
        self.geometry.check(loc)?;
        let w = WeakBit { line: self.geometry.line_index(loc) as u32, bit, margin };
        Self::check_weak(&self.geometry, self.pattern_penalty, &w)?;
        match self.weak.binary_search_by(|x| (x.line, x.bit).cmp(&(w.line, w.bit))) {
            Ok(i) => self.weak[i] = w,
            Err(i) => self.weak.insert(i, w),
        }
        Ok(())
    }
}
