//! Durations in integer picoseconds.
//!
//! Every latency in the model is kept as whole picoseconds so that threshold
//! comparisons are exact and CSV round-trips (three fractional nanosecond
//! digits) are lossless.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use crate::error::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Latency(u32);

impl Latency {
    pub const ZERO: Latency = Latency(0);

    pub const fn from_ps(ps: u32) -> Self {
        Latency(ps)
    }

    /// Rounds to the nearest picosecond. Negative or non-finite input saturates to zero.
    pub fn from_ns(ns: f64) -> Self {
        if !ns.is_finite() || ns <= 0.0 {
            return Latency(0);
        }
        Latency((ns * 1000.0).round().min(u32::MAX as f64) as u32)
    }

    pub const fn ps(self) -> u32 {
        self.0
    }

    pub fn ns(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Number of whole clock periods needed to cover this latency.
    pub fn cycles(self, tck: Latency) -> u64 {
        debug_assert!(tck.0 > 0);
        (self.0 as u64).div_ceil(tck.0 as u64)
    }

    /// Duration of `cycles` clock periods.
    pub fn of_cycles(cycles: u64, tck: Latency) -> Self {
        Latency((cycles.saturating_mul(tck.0 as u64)).min(u32::MAX as u64) as u32)
    }

    pub fn saturating_sub(self, other: Latency) -> Latency {
        Latency(self.0.saturating_sub(other.0))
    }
}

impl Add for Latency {
    type Output = Latency;
    fn add(self, rhs: Latency) -> Latency {
        Latency(self.0.saturating_add(rhs.0))
    }
}

impl Sub for Latency {
    type Output = Latency;
    fn sub(self, rhs: Latency) -> Latency {
        self.saturating_sub(rhs)
    }
}

/// Formats as nanoseconds with exactly three fractional digits.
impl fmt::Display for Latency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

/// Parses a non-negative decimal nanosecond value with at most three
/// fractional digits, exactly.
impl FromStr for Latency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::param(format!("invalid duration `{s}`"));
        if s.starts_with('-') {
            return Err(Error::param(format!("negative duration `{s}`")));
        }
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if frac.len() > 3 {
            return Err(Error::param(format!("duration `{s}` has more than 3 fractional digits")));
        }
        if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let mut frac_ps: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        for _ in frac.len()..3 {
            frac_ps *= 10;
        }
        let ps = int
            .checked_mul(1000)
            .and_then(|v| v.checked_add(frac_ps))
            .filter(|&v| v <= u32::MAX as u64)
            .ok_or_else(|| Error::param(format!("duration `{s}` out of range")))?;
        Ok(Latency(ps as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let l: Latency = "13.125".parse().unwrap();
        assert_eq!(l.ps(), 13_125);
        assert_eq!(l.to_string(), "13.125");
        assert_eq!("7.5".parse::<Latency>().unwrap().ps(), 7_500);
        assert_eq!("36".parse::<Latency>().unwrap().to_string(), "36.000");
        assert_eq!(".5".parse::<Latency>().unwrap().ps(), 500);
        assert!("-1.0".parse::<Latency>().is_err());
        assert!("1.2345".parse::<Latency>().is_err());
        assert!("abc".parse::<Latency>().is_err());
        assert!("".parse::<Latency>().is_err());
    }

    #[test]
    fn ceiling_cycles() {
        let tck = Latency::from_ns(1.5);
        assert_eq!(Latency::from_ns(13.125).cycles(tck), 9);
        assert_eq!(Latency::from_ns(7.5).cycles(tck), 5);
        assert_eq!(Latency::from_ns(36.0).cycles(tck), 24);
        assert_eq!(Latency::from_ns(27.0).cycles(tck), 18);
        assert_eq!(Latency::from_ns(10.0).cycles(tck), 7);
        assert_eq!(Latency::from_ns(12.5).cycles(tck), 9);
    }
}
