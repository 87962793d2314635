use std::fmt;
use std::str::FromStr;

use super::bloom::SlowSetFilter;
use super::region::{lookup_timing, RegionMap};
use crate::device::TimingParams;
use crate::error::{Error, Result};
use crate::geometry::Location;
use crate::timing::{Channel, Command};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Policy {
    /// Serve only the oldest request.
    Fcfs,
    /// Ready row hits first, then the oldest request with a ready command.
    #[default]
    FrFcfs,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Fcfs => "fcfs",
            Policy::FrFcfs => "frfcfs",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "").as_str() {
            "fcfs" => Ok(Policy::Fcfs),
            "frfcfs" => Ok(Policy::FrFcfs),
            other => Err(Error::param(format!("unknown scheduling policy `{other}`"))),
        }
    }
}

/// Where per-request timings come from.
#[derive(Clone, Debug)]
pub enum TimingSource {
    /// One set of timings for every address.
    Uniform(TimingParams),
    Map(RegionMap),
    Filter(SlowSetFilter),
}

impl TimingSource {
    pub fn timing_for(&self, loc: &Location) -> Result<TimingParams> {
        match self {
            TimingSource::Uniform(t) => Ok(*t),
            TimingSource::Map(m) => lookup_timing(m, loc),
            TimingSource::Filter(f) => f.lookup_timing(loc),
        }
    }

    /// Controller-side storage for the lookup structure.
    pub fn storage_bytes(&self) -> u64 {
        match self {
            TimingSource::Uniform(_) => 0,
            TimingSource::Map(m) => m.storage_bytes(),
            TimingSource::Filter(f) => f.storage_bytes(),
        }
    }

    pub fn mode(&self) -> &'static str {
        match self {
            TimingSource::Uniform(_) => "baseline",
            TimingSource::Map(_) => "flydram-map",
            TimingSource::Filter(_) => "flydram-filter",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Request {
    pub id: u64,
    pub arrival: u64,
    pub is_write: bool,
    pub location: Location,
    /// Bank index within the channel.
    pub bank: usize,
    pub timings: TimingParams,
}

/// Pending requests of one channel in arrival order.
#[derive(Clone, Debug, Default)]
pub struct RequestQueue {
    policy: Policy,
    pending: Vec<Request>,
}

impl RequestQueue {
    pub fn new(policy: Policy) -> Self {
        RequestQueue { policy, pending: Vec::new() }
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    /// Appends `req`; arrivals must not decrease.
    pub fn push(&mut self, req: Request) {
        debug_assert!(self.pending.last().is_none_or(|l| l.arrival <= req.arrival));
        self.pending.push(req);
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn get(&self, index: usize) -> &Request {
        &self.pending[index]
    }

    pub fn remove(&mut self, index: usize) -> Request {
        self.pending.remove(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Request> {
        self.pending.iter()
    }
}

/// A command chosen for issue on behalf of the request at `request`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scheduled {
    pub command: Command,
    /// Index of the request in its queue.
    pub request: usize,
}

impl Scheduled {
    /// Column commands complete their request.
    pub fn completes_request(&self) -> bool {
        self.command.kind.is_column()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Plan {
    Issue(Scheduled),
    /// Nothing is issuable before this cycle.
    WaitUntil(u64),
    Idle,
}

/// Next command `req` needs given the bank's open row. The timings of the
/// request ride on every command issued for it.
fn needed(req: &Request, channel: &Channel) -> Command {
    let t = req.timings;
    match channel.bank(req.bank).open_row() {
        Some(row) if row == req.location.row => {
            if req.is_write {
                Command::wr(req.bank, req.location.cacheline, t)
            } else {
                Command::rd(req.bank, req.location.cacheline, t)
            }
        }
        Some(_) => Command::pre(req.bank, t),
        None => Command::act(req.bank, req.location.row, t),
    }
}

/// Scheduling decision at cycle `now`, or the next cycle worth asking again.
pub fn plan(queue: &RequestQueue, channel: &Channel, now: u64) -> Result<Plan> {
    let candidates = match queue.policy {
        Policy::Fcfs => &queue.pending[..queue.pending.len().min(1)],
        Policy::FrFcfs => &queue.pending[..],
    };
    let mut wait = u64::MAX;
    let mut oldest_ready: Option<Scheduled> = None;
    for (i, req) in candidates.iter().enumerate() {
        let command = needed(req, channel);
        let at = channel.earliest_issue_time(&command, now)?;
        if at > now {
            wait = wait.min(at);
            continue;
        }
        let s = Scheduled { command, request: i };
        if command.kind.is_column() {
            return Ok(Plan::Issue(s));
        }
        oldest_ready.get_or_insert(s);
    }
    Ok(match oldest_ready {
        Some(s) => Plan::Issue(s),
        None if wait == u64::MAX => Plan::Idle,
        None => Plan::WaitUntil(wait),
    })
}

/// The command to issue at `now`, if any.
pub fn next_command(queue: &RequestQueue, channel: &Channel, now: u64) -> Result<Option<Scheduled>> {
    Ok(match plan(queue, channel, now)? {
        Plan::Issue(s) => Some(s),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timing::CommandKind;
    use crate::units::Latency;
    use proptest::prelude::*;

    fn spec() -> TimingParams {
        TimingParams::ddr3_1333h()
    }

    fn fast() -> TimingParams {
        spec().with_core(Latency::from_ps(7_500), Latency::from_ps(7_500), Latency::from_ps(27_000)).unwrap()
    }

    fn req(id: u64, bank: usize, row: u32, cacheline: u32, t: TimingParams) -> Request {
        Request {
            id,
            arrival: id,
            is_write: false,
            location: Location { channel: 0, rank: 0, bank: bank as u32, row, cacheline },
            bank,
            timings: t,
        }
    }

    #[test]
    fn empty_queue_is_idle() {
        let q = RequestQueue::new(Policy::FrFcfs);
        assert_eq!(plan(&q, &Channel::new(8), 0).unwrap(), Plan::Idle);
        assert_eq!(next_command(&q, &Channel::new(8), 0).unwrap(), None);
    }

    #[test]
    fn younger_row_hit_wins() {
        let mut ch = Channel::new(8);
        ch.apply(&Command::act(0, 5, spec()), 0).unwrap();
        let mut q = RequestQueue::new(Policy::FrFcfs);
        q.push(req(0, 0, 9, 0, spec()));
        q.push(req(1, 0, 5, 3, spec()));
        let s = next_command(&q, &ch, 30).unwrap().unwrap();
        assert_eq!(s.request, 1);
        assert_eq!(s.command.kind, CommandKind::Rd);

        let mut fcfs = RequestQueue::new(Policy::Fcfs);
        fcfs.push(req(0, 0, 9, 0, spec()));
        fcfs.push(req(1, 0, 5, 3, spec()));
        let s = next_command(&fcfs, &ch, 30).unwrap().unwrap();
        assert_eq!((s.request, s.command.kind), (0, CommandKind::Pre));
    }

    #[test]
    fn conflict_precharges_with_target_trp() {
        let mut ch = Channel::new(8);
        ch.apply(&Command::act(0, 1, spec()), 0).unwrap();
        let mut q = RequestQueue::new(Policy::FrFcfs);
        q.push(req(0, 0, 2, 0, fast()));
        // Open row's tRAS (24 cycles at spec) gates the PRE.
        assert_eq!(plan(&q, &ch, 0).unwrap(), Plan::WaitUntil(24));
        let s = next_command(&q, &ch, 24).unwrap().unwrap();
        assert_eq!(s.command.kind, CommandKind::Pre);
        assert_eq!(s.command.timings.trp_cyc(), 5);
        ch.apply(&s.command, 24).unwrap();
        assert_eq!(plan(&q, &ch, 24).unwrap(), Plan::WaitUntil(29));
        let act = next_command(&q, &ch, 29).unwrap().unwrap();
        assert_eq!(act.command, Command::act(0, 2, fast()));
    }

    #[test]
    fn oldest_first_among_hits() {
        let mut ch = Channel::new(8);
        ch.apply(&Command::act(2, 4, fast()), 0).unwrap();
        let mut q = RequestQueue::new(Policy::FrFcfs);
        q.push(req(0, 2, 4, 7, fast()));
        q.push(req(1, 2, 4, 1, fast()));
        assert_eq!(next_command(&q, &ch, 10).unwrap().unwrap().request, 0);
    }

    proptest! {
        #[test]
        fn work_conserving(ops in proptest::collection::vec((0usize..3, 0u32..3, 0u32..4, any::<bool>()), 1..12),
                           now in 0u64..80) {
            let mut ch = Channel::new(3);
            let mut t = 0;
            for (bank, row, _, _) in ops.iter().take(3) {
                if ch.bank(*bank).open_row().is_none() {
                    let c = Command::act(*bank, *row, spec());
                    t = ch.earliest_issue_time(&c, t).unwrap();
                    ch.apply(&c, t).unwrap();
                }
            }
            let mut q = RequestQueue::new(Policy::FrFcfs);
            for (i, (bank, row, cl, f)) in ops.iter().enumerate() {
                q.push(req(i as u64, *bank, *row, *cl, if *f { fast() } else { spec() }));
            }
            let now = t + now;
            let any_ready = q.iter().any(|r| ch.earliest_issue_time(&needed(r, &ch), now).unwrap() <= now);
            prop_assert_eq!(next_command(&q, &ch, now).unwrap().is_some(), any_ready);
        }
    }
}
