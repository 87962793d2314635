//! Per-location latency thresholds and the read-error model driven by them.

mod data;
mod generate;
mod inject;
mod io;
mod params;
mod profile;

pub use data::{DataBits, DataPattern};
pub use generate::{generate_profile, VariationParams, FAST_FLOOR, SLOW_CAP, TRAS_CAP, TRAS_FLOOR};
pub use inject::{inject_read_errors, AccessContext, AppliedTimings};
pub use io::{export_profile, export_weak_bits, import_profile, PROFILE_MAGIC, WEAK_MAGIC};
pub use params::{TimingParams, BL8_BURST_CYCLES, DDR3_1333_TCK};
pub use profile::{LatencyProfile, OpKind, WeakBit};
