//! Region maps, the slow-set filter and request scheduling.

mod bloom;
mod io;
mod region;
mod sched;

pub use bloom::{compress_slow_set, SlowSetFilter};
pub use io::{export_region_map, import_region_map, REGIONMAP_MAGIC};
pub use region::{build_region_map, lookup_timing, Granularity, LatencySteps, RegionMap};
pub use sched::{next_command, plan, Plan, Policy, Request, RequestQueue, Scheduled, TimingSource};
