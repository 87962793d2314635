use sha2::{Digest, Sha256};

use crate::device::LatencyProfile;

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn fingerprint(bytes: &[u8]) -> String {
    hex16(&Sha256::digest(bytes))
}

fn hex16(digest: &[u8]) -> String {
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a profile: geometry, thresholds, weak bits and model
/// parameters.
pub fn profile_fingerprint(profile: &LatencyProfile) -> String {
    let mut h = Sha256::new();
    h.update(profile.geometry().directive().as_bytes());
    for table in [profile.line_trcd_ps(), profile.row_trp_ps(), profile.row_tras_ps()] {
        for chunk in table.chunks(4096) {
            let bytes: Vec<u8> = chunk.iter().flat_map(|v| v.to_le_bytes()).collect();
            h.update(&bytes);
        }
    }
    for w in profile.all_weak_bits() {
        h.update(w.line.to_le_bytes());
        h.update(w.bit.to_le_bytes());
        h.update(w.margin.ps().to_le_bytes());
    }
    h.update(profile.pattern_penalty().ps().to_le_bytes());
    h.update(profile.jitter_sigma_ns().to_le_bytes());
    h.update(profile.seed().to_le_bytes());
    hex16(&h.finalize())
}

pub(crate) struct StreamHasher(Sha256);

impl StreamHasher {
    pub(crate) fn new() -> Self {
        StreamHasher(Sha256::new())
    }

    pub(crate) fn update(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }

    pub(crate) fn finish(self) -> String {
        hex16(&self.0.finalize())
    }
}
