//! Per-bank and per-channel command legality.
//!
//! Constraints enforced, each measured from the issue cycle of the earlier
//! command:
//!
//! | earlier | later  | scope   | gap                                   |
//! |---------|--------|---------|---------------------------------------|
//! | PRE     | ACT    | bank    | max(tRP of PRE, tRP of ACT)           |
//! | ACT     | RD/WR  | bank    | max(tRCD of ACT, tRCD of RD/WR)       |
//! | ACT     | PRE    | bank    | tRAS of ACT                           |
//! | RD/WR   | PRE    | bank    | burst of RD/WR                        |
//! | RD/WR   | RD/WR  | channel | burst of the earlier command          |
//! | any     | any    | channel | 1 (one command per cycle)             |
//!
//! Timings travel with commands, so a bank whose consecutive rows need
//! different latencies is handled exactly.

use std::fmt;

use crate::device::TimingParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CommandKind {
    Act,
    Rd,
    Wr,
    Pre,
}

impl CommandKind {
    pub fn is_column(self) -> bool {
        matches!(self, CommandKind::Rd | CommandKind::Wr)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommandKind::Act => "ACT",
            CommandKind::Rd => "RD",
            CommandKind::Wr => "WR",
            CommandKind::Pre => "PRE",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Command {
    pub kind: CommandKind,
    pub bank: usize,
    /// Present for ACT only.
    pub row: Option<u32>,
    /// Present for RD/WR only.
    pub cacheline: Option<u32>,
    pub timings: TimingParams,
}

impl Command {
    pub fn act(bank: usize, row: u32, timings: TimingParams) -> Self {
        Command { kind: CommandKind::Act, bank, row: Some(row), cacheline: None, timings }
    }

    pub fn rd(bank: usize, cacheline: u32, timings: TimingParams) -> Self {
        Command { kind: CommandKind::Rd, bank, row: None, cacheline: Some(cacheline), timings }
    }

    pub fn wr(bank: usize, cacheline: u32, timings: TimingParams) -> Self {
        Command { kind: CommandKind::Wr, bank, row: None, cacheline: Some(cacheline), timings }
    }

    pub fn pre(bank: usize, timings: TimingParams) -> Self {
        Command { kind: CommandKind::Pre, bank, row: None, cacheline: None, timings }
    }

    fn check_fields(&self) -> Result<()> {
        let ok = match self.kind {
            CommandKind::Act => self.row.is_some() && self.cacheline.is_none(),
            CommandKind::Rd | CommandKind::Wr => self.row.is_none() && self.cacheline.is_some(),
            CommandKind::Pre => self.row.is_none() && self.cacheline.is_none(),
        };
        if ok {
            Ok(())
        } else {
            Err(self.protocol("fields do not match command kind"))
        }
    }

    fn protocol(&self, reason: &'static str) -> Error {
        Error::Protocol { kind: self.kind, bank: self.bank, reason }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Activating,
    Active,
    Precharging,
}

/// Per-bank command history reduced to what legality and error checks need.
///
/// `open_row` is set exactly between an ACT and the following PRE.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BankState {
    open_row: Option<u32>,
    last_act: Option<u64>,
    last_rd: Option<u64>,
    last_wr: Option<u64>,
    last_pre: Option<u64>,
    last_cmd: Option<u64>,
    col_free: u64,
    act_granted: Option<TimingParams>,
    pre_granted: Option<TimingParams>,
    restore_window: Option<u64>,
    precharge_window: Option<u64>,
    reads_since_act: u32,
}

impl BankState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open_row(&self) -> Option<u32> {
        self.open_row
    }

    pub fn last_act(&self) -> Option<u64> {
        self.last_act
    }

    pub fn last_rd(&self) -> Option<u64> {
        self.last_rd
    }

    pub fn last_wr(&self) -> Option<u64> {
        self.last_wr
    }

    pub fn last_pre(&self) -> Option<u64> {
        self.last_pre
    }

    /// Timings granted by the ACT that opened the current (or last) row.
    pub fn act_granted(&self) -> Option<&TimingParams> {
        self.act_granted.as_ref()
    }

    /// Timings granted by the most recent PRE.
    pub fn pre_granted(&self) -> Option<&TimingParams> {
        self.pre_granted.as_ref()
    }

    /// Cycles between the last ACT and the PRE that closed it.
    pub fn restore_window(&self) -> Option<u64> {
        self.restore_window
    }

    /// Cycles between the PRE preceding the current activation and that ACT.
    pub fn precharge_window(&self) -> Option<u64> {
        self.precharge_window
    }

    /// Column reads issued since the row was opened.
    pub fn reads_since_act(&self) -> u32 {
        self.reads_since_act
    }

    pub fn phase(&self, now: u64) -> Phase {
        match (self.open_row, self.last_act, self.act_granted) {
            (Some(_), Some(act), Some(t)) if now < act + t.trcd_cyc() => Phase::Activating,
            (Some(_), _, _) => Phase::Active,
            (None, _, _) => match (self.last_pre, self.pre_granted) {
                (Some(pre), Some(t)) if now < pre + t.trp_cyc() => Phase::Precharging,
                _ => Phase::Idle,
            },
        }
    }

    /// Smallest cycle `>= now` at which `cmd` satisfies every bank-scoped
    /// constraint.
    pub fn earliest_issue_time(&self, cmd: &Command, now: u64) -> Result<u64> {
        cmd.check_fields()?;
        let t = &cmd.timings;
        let mut at = now.max(self.last_cmd.unwrap_or(0));
        match cmd.kind {
            CommandKind::Act => {
                if self.open_row.is_some() {
                    return Err(cmd.protocol("row already open"));
                }
                if let (Some(pre), Some(g)) = (self.last_pre, &self.pre_granted) {
                    at = at.max(pre + g.trp_cyc().max(t.trp_cyc()));
                }
            }
            CommandKind::Rd | CommandKind::Wr => {
                let (Some(act), Some(g)) = (self.last_act, &self.act_granted) else {
                    return Err(cmd.protocol("no open row"));
                };
                if self.open_row.is_none() {
                    return Err(cmd.protocol("no open row"));
                }
                at = at.max(act + g.trcd_cyc().max(t.trcd_cyc())).max(self.col_free);
            }
            CommandKind::Pre => {
                let (Some(act), Some(g)) = (self.last_act, &self.act_granted) else {
                    return Err(cmd.protocol("no open row"));
                };
                if self.open_row.is_none() {
                    return Err(cmd.protocol("no open row"));
                }
                at = at.max(act + g.tras_cyc()).max(self.col_free);
            }
        }
        Ok(at)
    }

    /// Records `cmd` issued at cycle `at`. Leaves the state untouched on error.
    pub fn apply(&mut self, cmd: &Command, at: u64) -> Result<()> {
        let earliest = self.earliest_issue_time(cmd, at)?;
        if earliest > at {
            return Err(Error::TimingViolation { kind: cmd.kind, at, earliest });
        }
        match cmd.kind {
            CommandKind::Act => {
                self.open_row = cmd.row;
                self.precharge_window = self.last_pre.map(|p| at - p);
                self.last_act = Some(at);
                self.act_granted = Some(cmd.timings);
                self.reads_since_act = 0;
            }
            CommandKind::Rd => {
                self.last_rd = Some(at);
                self.reads_since_act += 1;
                self.col_free = at + cmd.timings.burst_cyc();
            }
            CommandKind::Wr => {
                self.last_wr = Some(at);
                self.col_free = at + cmd.timings.burst_cyc();
            }
            CommandKind::Pre => {
                self.open_row = None;
                self.restore_window = self.last_act.map(|a| at - a);
                self.last_pre = Some(at);
                self.pre_granted = Some(cmd.timings);
            }
        }
        self.last_cmd = Some(at);
        Ok(())
    }
}

/// The banks of one channel plus the shared command and data bus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Channel {
    banks: Vec<BankState>,
    last_cmd: Option<u64>,
    bus_free: u64,
}

impl Channel {
    pub fn new(banks: usize) -> Self {
        Channel { banks: vec![BankState::new(); banks], last_cmd: None, bus_free: 0 }
    }

    pub fn banks(&self) -> &[BankState] {
        &self.banks
    }

    pub fn bank(&self, bank: usize) -> &BankState {
        &self.banks[bank]
    }

    fn bank_checked(&self, cmd: &Command) -> Result<&BankState> {
        self.banks
            .get(cmd.bank)
            .ok_or_else(|| Error::Address(format!("bank {} outside channel of {}", cmd.bank, self.banks.len())))
    }

    pub fn earliest_issue_time(&self, cmd: &Command, now: u64) -> Result<u64> {
        let mut at = self.bank_checked(cmd)?.earliest_issue_time(cmd, now)?;
        if let Some(last) = self.last_cmd {
            at = at.max(last + 1);
        }
        if cmd.kind.is_column() {
            at = at.max(self.bus_free);
        }
        Ok(at)
    }

    pub fn apply(&mut self, cmd: &Command, at: u64) -> Result<()> {
        let earliest = self.earliest_issue_time(cmd, at)?;
        if earliest > at {
            return Err(Error::TimingViolation { kind: cmd.kind, at, earliest });
        }
        self.banks[cmd.bank].apply(cmd, at)?;
        self.last_cmd = Some(at);
        if cmd.kind.is_column() {
            self.bus_free = at + cmd.timings.burst_cyc();
        }
        Ok(())
    }
}
