//! Software characterization of a module: latency sweeps over data patterns
//! and rounds, BER tables, spatial error maps and per-beat ECC analysis.

mod ecc;
mod io;
mod spatial;
mod sweep;

pub use ecc::{
    beat_error_histogram, ecc_correctable_fraction, secded_decode, secded_encode, BeatHistogram, EccFraction,
    EccScheme, SecdedOutcome,
};
pub use io::{read_ber_csv, write_ber_csv, write_error_map_csv, BER_MAGIC, ERRMAP_MAGIC};
pub use spatial::{shuffled_control, spatial_locality_score, SpatialScore};
pub use sweep::{
    compute_ber, run_characterization, BerRow, BerTable, Characterization, ErrorMap, Param, PointResult, SweepConfig,
    SweepPoint,
};
