use std::io;

use thiserror::Error;

use crate::timing::CommandKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("address out of range: {0}")]
    Address(String),

    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("protocol error: {kind:?} not legal on bank {bank} ({reason})")]
    Protocol { kind: CommandKind, bank: usize, reason: &'static str },

    #[error("timing violation: {kind:?} at cycle {at} before earliest legal cycle {earliest}")]
    TimingViolation { kind: CommandKind, at: u64, earliest: u64 },

    #[error("mapping error: {0}")]
    Mapping(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format { line, msg: msg.into() }
    }
}
