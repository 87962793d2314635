//! Per-beat error statistics and a SECDED(72,64) Hamming code.

use crate::device::DataBits;
use crate::error::{Error, Result};

/// Codeword positions 1..=71 not a power of two, in data-bit order.
const DATA_POSITIONS: [u8; 64] = data_positions();

const fn data_positions() -> [u8; 64] {
    let mut out = [0u8; 64];
    let mut pos = 1u8;
    let mut i = 0;
    while i < 64 {
        if !pos.is_power_of_two() {
            out[i] = pos;
            i += 1;
        }
        pos += 1;
    }
    out
}

fn syndrome_of(data: u64) -> u8 {
    let mut s = 0u8;
    let mut d = data;
    while d != 0 {
        let i = d.trailing_zeros() as usize;
        s ^= DATA_POSITIONS[i];
        d &= d - 1;
    }
    s
}

/// Check byte for `data`: seven Hamming bits (bits 0..7) and overall parity
/// (bit 7).
pub fn secded_encode(data: u64) -> u8 {
    let hamming = syndrome_of(data) & 0x7f;
    let parity = (data.count_ones() + hamming.count_ones()) & 1;
    hamming | (parity as u8) << 7
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SecdedOutcome {
    Clean,
    /// One bit was wrong; the corrected data word is returned.
    Corrected(u64),
    /// Two (or an even number of) bits were wrong.
    Detected,
}

pub fn secded_decode(data: u64, check: u8) -> SecdedOutcome {
    let syndrome = (syndrome_of(data) ^ check) & 0x7f;
    let parity_ok = (data.count_ones() + check.count_ones()) & 1 == 0;
    match (syndrome, parity_ok) {
        (0, true) => SecdedOutcome::Clean,
        (_, true) => SecdedOutcome::Detected,
        (0, false) => SecdedOutcome::Corrected(data),
        (s, false) => match DATA_POSITIONS.iter().position(|&p| p == s) {
            Some(i) => SecdedOutcome::Corrected(data ^ (1 << i)),
            // Syndrome names one of the check bits.
            None if s.is_power_of_two() => SecdedOutcome::Corrected(data),
            None => SecdedOutcome::Detected,
        },
    }
}

/// Frequency of beats by number of flipped bits.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BeatHistogram {
    beat_bits: u32,
    freq: Vec<u64>,
}

impl BeatHistogram {
    pub fn new(beat_bits: u32) -> Self {
        BeatHistogram { beat_bits, freq: vec![0; beat_bits as usize + 1] }
    }

    pub fn beat_bits(&self) -> u32 {
        self.beat_bits
    }

    pub fn freq(&self, flipped: u32) -> u64 {
        self.freq.get(flipped as usize).copied().unwrap_or(0)
    }

    pub fn add(&mut self, flipped: u32, count: u64) {
        self.freq[flipped as usize] += count;
    }

    pub fn beats(&self) -> u64 {
        self.freq.iter().sum()
    }

    pub fn erroneous_beats(&self) -> u64 {
        self.freq[1..].iter().sum()
    }

    pub fn multi_bit_beats(&self) -> u64 {
        self.freq.get(2..).map_or(0, |f| f.iter().sum())
    }

    /// Non-zero buckets as `(flipped bits, frequency)`.
    pub fn buckets(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.freq.iter().enumerate().filter(|(_, &f)| f > 0).map(|(k, &f)| (k as u32, f))
    }

    pub fn merge(&mut self, other: &BeatHistogram) {
        assert_eq!(self.beat_bits, other.beat_bits, "beat widths differ");
        for (a, b) in self.freq.iter_mut().zip(&other.freq) {
            *a += b;
        }
    }
}

/// Histogram of flipped bits per `beat_bits`-bit beat over `bitmaps`.
pub fn beat_error_histogram(bitmaps: &[DataBits], beat_bits: u32) -> Result<BeatHistogram> {
    if beat_bits == 0 {
        return Err(Error::param("beat width must be positive"));
    }
    let mut h = BeatHistogram::new(beat_bits);
    for (i, b) in bitmaps.iter().enumerate() {
        if b.len() % beat_bits != 0 {
            return Err(Error::param(format!("bitmap {i} has {} bits, not a multiple of {beat_bits}", b.len())));
        }
        if beat_bits == 64 {
            for w in b.words() {
                h.add(w.count_ones(), 1);
            }
        } else {
            for beat in 0..b.len() / beat_bits {
                let n = (beat * beat_bits..(beat + 1) * beat_bits).filter(|&bit| b.get(bit)).count();
                h.add(n as u32, 1);
            }
        }
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EccScheme {
    /// Single-error-correct, double-error-detect over each 64-bit beat.
    #[default]
    Secded64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EccFraction {
    pub ratio: f64,
    /// No erroneous beats; `ratio` is defined as 1.
    pub degenerate: bool,
}

/// Share of erroneous beats the scheme corrects.
pub fn ecc_correctable_fraction(histogram: &BeatHistogram, scheme: EccScheme) -> Result<EccFraction> {
    match scheme {
        EccScheme::Secded64 if histogram.beat_bits() != 64 => {
            Err(Error::param("SECDED_64 needs a 64-bit beat histogram"))
        }
        EccScheme::Secded64 => {
            let erroneous = histogram.erroneous_beats();
            Ok(if erroneous == 0 {
                EccFraction { ratio: 1.0, degenerate: true }
            } else {
                EccFraction { ratio: histogram.freq(1) as f64 / erroneous as f64, degenerate: false }
            })
        }
    }
}
