use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::trace::{MemoryTrace, Op};
use crate::controller::{plan, Plan, Policy, Request, RequestQueue, TimingSource};
use crate::device::{AppliedTimings, DataPattern, LatencyProfile};
use crate::error::{Error, Result};
use crate::profiler::{secded_decode, secded_encode, SecdedOutcome};
use crate::rng;
use crate::timing::{Channel, CommandKind};
use crate::units::Latency;

const SIM_KEY: u64 = 0x0053_494d;

/// A latency long enough that no threshold exceeds it; stands in for
/// windows that were never shortened (a row never precharged or closed).
const UNBOUNDED: Latency = Latency::from_ps(u32::MAX);

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub source: TimingSource,
    /// Cap on requests admitted but not yet completed.
    pub mlp_limit: usize,
    pub policy: Policy,
    /// Data assumed stored in every line when reads are checked for flips.
    pub pattern: DataPattern,
    /// Count single-bit beat errors as corrected by SECDED.
    pub ecc: bool,
    /// Seeds the per-read threshold noise when the profile has jitter.
    pub seed: u64,
}

impl SimConfig {
    pub fn new(source: TimingSource) -> Self {
        SimConfig { source, mlp_limit: 4, policy: Policy::FrFcfs, pattern: DataPattern::AllZeros, ecc: false, seed: 0 }
    }

    /// Canonical description used for config fingerprints.
    pub fn describe(&self) -> String {
        format!(
            "mode={} mlp={} policy={} pattern={} ecc={} seed={}",
            self.source.mode(),
            self.mlp_limit,
            self.policy,
            self.pattern,
            self.ecc,
            self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimStats {
    pub requests_served: u64,
    pub avg_read_latency_cyc: f64,
    /// Nearest-rank 99th percentile.
    pub p99_read_latency_cyc: u64,
    pub row_hit_rate: f64,
    /// Cycle at which the last request completed.
    pub total_cycles: u64,
    pub injected_bit_flips: u64,
    /// Erroneous beats SECDED restored; zero unless ECC is enabled.
    pub ecc_corrected: u64,
    pub regionmap_bytes: u64,
    pub trace_fingerprint: String,
}

/// `base.total_cycles / other.total_cycles` for two runs of one trace.
pub fn speedup(base: &SimStats, other: &SimStats) -> Result<f64> {
    if base.trace_fingerprint != other.trace_fingerprint {
        return Err(Error::param(format!(
            "runs use different traces ({} vs {})",
            base.trace_fingerprint, other.trace_fingerprint
        )));
    }
    if other.total_cycles == 0 {
        return if base.total_cycles == 0 { Ok(1.0) } else { Err(Error::param("run took zero cycles")) };
    }
    Ok(base.total_cycles as f64 / other.total_cycles as f64)
}

struct Device<'a> {
    profile: &'a LatencyProfile,
    pattern: DataPattern,
    ecc: bool,
    rng: rng::SimRng,
    /// ACT to PRE window, in cycles, of each row's most recent closing.
    restored: HashMap<u64, u64>,
    flips: Vec<u32>,
    injected: u64,
    corrected: u64,
}

impl Device<'_> {
    fn read(&mut self, line: u64, row: u64, applied: AppliedTimings, first_read: bool) {
        if self.profile.weak_bits_at(line).is_empty() {
            return;
        }
        let pattern = self.pattern;
        let flips = &mut self.flips;
        flips.clear();
        self.profile.for_each_flip(
            line,
            row,
            &applied,
            first_read,
            |b| pattern.bit(line, b),
            &mut self.rng,
            |b| flips.push(b),
        );
        self.injected += flips.len() as u64;
        if !self.ecc {
            return;
        }
        let mut i = 0;
        while i < flips.len() {
            let beat = flips[i] / 64;
            let mut mask = 0u64;
            while i < flips.len() && flips[i] / 64 == beat {
                mask |= 1 << (flips[i] % 64);
                i += 1;
            }
            let written = pattern.word(line, beat);
            if secded_decode(written ^ mask, secded_encode(written)) == SecdedOutcome::Corrected(written) {
                self.corrected += 1;
            }
        }
    }
}

/// Replays `trace` through one controller per channel over `profile`.
///
/// A request is admitted once its tick has passed and fewer than
/// `mlp_limit` requests are outstanding; it completes `tCL + burst` after
/// its column command. Read latency runs from admission to completion. A
/// request is a row miss when an ACT was issued on its behalf.
pub fn simulate(trace: &MemoryTrace, profile: &LatencyProfile, config: &SimConfig) -> Result<SimStats> {
    if config.mlp_limit == 0 {
        return Err(Error::param("mlp_limit must be positive"));
    }
    let g = *profile.geometry();
    let mapping = g.mapping();
    let banks = (g.ranks_per_channel * g.banks_per_rank) as usize;
    let mut channels: Vec<Channel> = (0..g.channels).map(|_| Channel::new(banks)).collect();
    let mut queues: Vec<RequestQueue> = (0..g.channels).map(|_| RequestQueue::new(config.policy)).collect();
    let mut device = Device {
        profile,
        pattern: config.pattern,
        ecc: config.ecc,
        rng: rng::stream(config.seed, &[SIM_KEY]),
        restored: HashMap::new(),
        flips: Vec::new(),
        injected: 0,
        corrected: 0,
    };

    let mut in_flight: BinaryHeap<Reverse<u64>> = BinaryHeap::new();
    let mut missed = vec![false; trace.len()];
    let mut latencies: Vec<u64> = Vec::new();
    let (mut served, mut hits, mut last_done) = (0u64, 0u64, 0u64);
    let mut next = 0usize;
    let mut now = 0u64;

    loop {
        while in_flight.peek().is_some_and(|Reverse(t)| *t <= now) {
            in_flight.pop();
        }
        while next < trace.len()
            && trace.entries[next].tick <= now
            && in_flight.len() + queued(&queues) < config.mlp_limit
        {
            let e = trace.entries[next];
            let location = mapping.decode(e.addr)?;
            let timings = config.source.timing_for(&location).map_err(|err| match err {
                Error::Mapping(msg) => Error::Mapping(format!("address {:#x}: {msg}", e.addr)),
                other => other,
            })?;
            queues[location.channel as usize].push(Request {
                id: next as u64,
                arrival: now,
                is_write: e.op == Op::Write,
                location,
                bank: g.channel_bank(&location),
                timings,
            });
            next += 1;
        }

        let mut wake = u64::MAX;
        for (channel, queue) in channels.iter_mut().zip(queues.iter_mut()) {
            let s = match plan(queue, channel, now)? {
                Plan::Issue(s) => s,
                Plan::WaitUntil(t) => {
                    wake = wake.min(t);
                    continue;
                }
                Plan::Idle => continue,
            };
            wake = wake.min(now + 1);
            let req = *queue.get(s.request);
            let bank = channel.bank(req.bank).clone();
            channel.apply(&s.command, now)?;
            match s.command.kind {
                CommandKind::Act => missed[req.id as usize] = true,
                CommandKind::Pre => {
                    let open = bank.open_row().expect("PRE issued on an open bank");
                    let row = g.row_index(&crate::geometry::Location { row: open, ..req.location });
                    device.restored.insert(row, now - bank.last_act().expect("open bank was activated"));
                }
                CommandKind::Rd | CommandKind::Wr => {
                    queue.remove(s.request);
                    let done = now + req.timings.tcl_cyc() + req.timings.burst_cyc();
                    in_flight.push(Reverse(done));
                    last_done = last_done.max(done);
                    served += 1;
                    if !missed[req.id as usize] {
                        hits += 1;
                    }
                    if s.command.kind == CommandKind::Rd {
                        latencies.push(done - req.arrival);
                        let tck = req.timings.tck();
                        let row = g.row_index(&req.location);
                        let cycles = |c: Option<u64>| c.map_or(UNBOUNDED, |c| Latency::of_cycles(c, tck));
                        let applied = AppliedTimings {
                            trcd: Latency::of_cycles(now - bank.last_act().expect("row is open"), tck),
                            trp: cycles(bank.precharge_window()),
                            tras: cycles(device.restored.get(&row).copied()),
                        };
                        device.read(g.line_index(&req.location), row, applied, bank.reads_since_act() == 0);
                    }
                }
            }
        }
        if let Some(Reverse(t)) = in_flight.peek() {
            wake = wake.min(*t);
        }
        if next < trace.len() && in_flight.len() + queued(&queues) < config.mlp_limit {
            wake = wake.min(trace.entries[next].tick.max(now + 1));
        }
        if wake == u64::MAX {
            break;
        }
        now = wake;
    }

    let (avg, p99) = if latencies.is_empty() {
        (0.0, 0)
    } else {
        let sum: u64 = latencies.iter().sum();
        latencies.sort_unstable();
        let rank = (latencies.len() * 99).div_ceil(100);
        (sum as f64 / latencies.len() as f64, latencies[rank - 1])
    };
    Ok(SimStats {
        requests_served: served,
        avg_read_latency_cyc: avg,
        p99_read_latency_cyc: p99,
        row_hit_rate: if served == 0 { 0.0 } else { hits as f64 / served as f64 },
        total_cycles: last_done,
        injected_bit_flips: device.injected,
        ecc_corrected: device.corrected,
        regionmap_bytes: config.source.storage_bytes(),
        trace_fingerprint: trace.fingerprint(),
    })
}

fn queued(queues: &[RequestQueue]) -> usize {
    queues.iter().map(RequestQueue::len).sum()
}
