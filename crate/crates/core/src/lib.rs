//! Cycle-level DRAM latency-variation simulator.
//!
//! The crate models a module whose cells tolerate different activation,
//! precharge and restoration latencies, characterizes such a module the
//! way a hardware tester would, and evaluates a memory controller that
//! serves each address region at its own profiled timings.
//!
//! Layers, bottom up:
//!
//! * [`device`]: per-location thresholds, profile generation and the read
//!   error model.
//! * [`timing`]: command legality per bank and channel.
//! * [`controller`]: region maps, slow-set filter and FR-FCFS scheduling.
//! * [`profiler`]: latency sweeps, BER tables, error maps and ECC analysis.
//! * [`simkit`]: traces, end-to-end simulation, statistics and page
//!   allocation.

pub mod controller;
pub mod device;
pub mod error;
pub mod geometry;
pub mod profiler;
pub mod rng;
pub mod simkit;
pub mod timing;
pub mod units;

pub use error::{Error, Result};
pub use geometry::{AddressMapping, Geometry, Location};
pub use units::Latency;
