use std::fmt;

use crate::error::{Error, Result};
use crate::units::Latency;

/// DDR3-1333 clock period.
pub const DDR3_1333_TCK: Latency = Latency::from_ps(1_500);
/// BL8 occupies four clock cycles on a double-data-rate bus.
pub const BL8_BURST_CYCLES: u32 = 4;

/// One set of applied timings, in nanoseconds and in controller clock cycles.
///
/// Cycle counts are the ceiling of `ns / tck`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TimingParams {
    trcd: Latency,
    trp: Latency,
    tras: Latency,
    tcl: Latency,
    tck: Latency,
    trcd_cyc: u32,
    trp_cyc: u32,
    tras_cyc: u32,
    tcl_cyc: u32,
    burst_cyc: u32,
}

impl TimingParams {
    pub fn new(trcd: Latency, trp: Latency, tras: Latency, tcl: Latency, tck: Latency, burst_cyc: u32) -> Result<Self> {
        if tck == Latency::ZERO {
            return Err(Error::param("tck must be positive"));
        }
        if burst_cyc == 0 {
            return Err(Error::param("burst length must be at least one cycle"));
        }
        let cyc = |l: Latency, name: &str| -> Result<u32> {
            match l.cycles(tck) {
                0 => Err(Error::param(format!("{name} must be positive"))),
                c => Ok(c as u32),
            }
        };
        let t = TimingParams {
            trcd,
            trp,
            tras,
            tcl,
            tck,
            trcd_cyc: cyc(trcd, "tRCD")?,
            trp_cyc: cyc(trp, "tRP")?,
            tras_cyc: cyc(tras, "tRAS")?,
            tcl_cyc: cyc(tcl, "tCL")?,
            burst_cyc,
        };
        if t.tras_cyc < t.trcd_cyc {
            return Err(Error::param(format!("tRAS ({tras}) shorter than tRCD ({trcd})")));
        }
        Ok(t)
    }

    /// Timings in ns on a DDR3-1333 clock with BL8 bursts.
    pub fn from_ns(trcd: f64, trp: f64, tras: f64, tcl: f64) -> Result<Self> {
        Self::new(
            Latency::from_ns(trcd),
            Latency::from_ns(trp),
            Latency::from_ns(tras),
            Latency::from_ns(tcl),
            DDR3_1333_TCK,
            BL8_BURST_CYCLES,
        )
    }

    /// Vendor baseline: DDR3-1333H, tRCD/tCL/tRP = 13.125 ns, tRAS = 36 ns.
    pub fn ddr3_1333h() -> Self {
        Self::from_ns(13.125, 13.125, 36.0, 13.125).expect("valid baseline timings")
    }

    /// Same clock, tCL and burst with new activation/precharge/restoration values.
    pub fn with_core(&self, trcd: Latency, trp: Latency, tras: Latency) -> Result<Self> {
        Self::new(trcd, trp, tras, self.tcl, self.tck, self.burst_cyc)
    }

    pub fn trcd(&self) -> Latency {
        self.trcd
    }
    pub fn trp(&self) -> Latency {
        self.trp
    }
    pub fn tras(&self) -> Latency {
        self.tras
    }
    pub fn tcl(&self) -> Latency {
        self.tcl
    }
    pub fn tck(&self) -> Latency {
        self.tck
    }
    pub fn trcd_cyc(&self) -> u64 {
        self.trcd_cyc as u64
    }
    pub fn trp_cyc(&self) -> u64 {
        self.trp_cyc as u64
    }
    pub fn tras_cyc(&self) -> u64 {
        self.tras_cyc as u64
    }
    pub fn tcl_cyc(&self) -> u64 {
        self.tcl_cyc as u64
    }
    pub fn burst_cyc(&self) -> u64 {
        self.burst_cyc as u64
    }

    /// Component-wise `self <= other` over tRCD, tRP and tRAS.
    pub fn core_le(&self, other: &TimingParams) -> bool {
        self.trcd <= other.trcd && self.trp <= other.trp && self.tras <= other.tras
    }
}

impl fmt::Display for TimingParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tRCD {} / tRP {} / tRAS {} / tCL {} ns", self.trcd, self.trp, self.tras, self.tcl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_cycles() {
        let t = TimingParams::ddr3_1333h();
        assert_eq!((t.trcd_cyc(), t.trp_cyc(), t.tras_cyc(), t.tcl_cyc(), t.burst_cyc()), (9, 9, 24, 9, 4));
    }

    #[test]
    fn reduced_cycles() {
        let t = TimingParams::from_ns(7.5, 7.5, 27.0, 13.125).unwrap();
        assert_eq!((t.trcd_cyc(), t.trp_cyc(), t.tras_cyc()), (5, 5, 18));
    }

    #[test]
    fn rejects_inconsistent() {
        assert!(TimingParams::from_ns(0.0, 7.5, 27.0, 13.125).is_err());
        assert!(TimingParams::from_ns(13.125, 7.5, 10.0, 13.125).is_err());
    }
}
