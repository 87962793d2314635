use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::splitmix64;

/// Fixed-length bit vector holding one cache line.
///
/// Bit `i` lives in word `i / 64` at position `i % 64`, so with 64-bit data
/// beats word `w` is beat `w`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DataBits {
    words: Vec<u64>,
    len: u32,
}

impl DataBits {
    pub fn zeros(len: u32) -> Self {
        DataBits { words: vec![0; (len as usize).div_ceil(64)], len }
    }

    pub fn ones(len: u32) -> Self {
        let mut d = DataBits { words: vec![u64::MAX; (len as usize).div_ceil(64)], len };
        d.mask_tail();
        d
    }

    pub fn from_words(words: Vec<u64>, len: u32) -> Result<Self> {
        if words.len() != (len as usize).div_ceil(64) {
            return Err(Error::param("word count does not match bit length"));
        }
        let mut d = DataBits { words, len };
        d.mask_tail();
        Ok(d)
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, bit: u32) -> bool {
        assert!(bit < self.len, "bit {bit} out of range {}", self.len);
        (self.words[(bit / 64) as usize] >> (bit % 64)) & 1 == 1
    }

    pub fn set(&mut self, bit: u32, value: bool) {
        assert!(bit < self.len, "bit {bit} out of range {}", self.len);
        let w = &mut self.words[(bit / 64) as usize];
        if value {
            *w |= 1 << (bit % 64);
        } else {
            *w &= !(1 << (bit % 64));
        }
    }

    pub fn flip(&mut self, bit: u32) {
        assert!(bit < self.len, "bit {bit} out of range {}", self.len);
        self.words[(bit / 64) as usize] ^= 1 << (bit % 64);
    }

    pub fn xor(&self, other: &DataBits) -> DataBits {
        assert_eq!(self.len, other.len);
        DataBits { words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(), len: self.len }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn ones_iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len).filter(move |&b| self.get(b))
    }
}

/// Data written before a characterization read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DataPattern {
    AllZeros,
    AllOnes,
    /// Every byte `0xAA`.
    Alternating,
    /// Every byte `0x55`.
    InverseAlternating,
    /// Per-line pseudo-random words keyed by seed and line index.
    Random(u64),
}

impl DataPattern {
    pub fn defaults() -> Vec<DataPattern> {
        vec![
            DataPattern::AllZeros,
            DataPattern::AllOnes,
            DataPattern::Alternating,
            DataPattern::InverseAlternating,
            DataPattern::Random(0x5eed),
        ]
    }

    /// The 64-bit word `word` of line `line_index`.
    pub fn word(&self, line_index: u64, word: u32) -> u64 {
        match *self {
            DataPattern::AllZeros => 0,
            DataPattern::AllOnes => u64::MAX,
            DataPattern::Alternating => 0xAAAA_AAAA_AAAA_AAAA,
            DataPattern::InverseAlternating => 0x5555_5555_5555_5555,
            DataPattern::Random(seed) => {
                splitmix64(seed ^ splitmix64(line_index.wrapping_mul(0x1_0000).wrapping_add(word as u64)))
            }
        }
    }

    pub fn bit(&self, line_index: u64, bit: u32) -> bool {
        (self.word(line_index, bit / 64) >> (bit % 64)) & 1 == 1
    }

    pub fn fill(&self, line_index: u64, len: u32) -> DataBits {
        let words = (0..(len as usize).div_ceil(64) as u32).map(|w| self.word(line_index, w)).collect();
        DataBits::from_words(words, len).expect("sized above")
    }
}

impl fmt::Display for DataPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataPattern::AllZeros => f.write_str("all_zeros"),
            DataPattern::AllOnes => f.write_str("all_ones"),
            DataPattern::Alternating => f.write_str("0xAA"),
            DataPattern::InverseAlternating => f.write_str("0x55"),
            DataPattern::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for DataPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all_zeros" => Ok(DataPattern::AllZeros),
            "all_ones" => Ok(DataPattern::AllOnes),
            "0xAA" | "0xaa" => Ok(DataPattern::Alternating),
            "0x55" => Ok(DataPattern::InverseAlternating),
            "random" => Ok(DataPattern::Random(0x5eed)),
            other => match other.strip_prefix("random:") {
                Some(seed) => seed
                    .parse()
                    .map(DataPattern::Random)
                    .map_err(|_| Error::param(format!("bad random pattern seed `{seed}`"))),
                None => Err(Error::param(format!("unknown data pattern `{other}`"))),
            },
        }
    }
}
