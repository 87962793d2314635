//! Command-line front end: profile generation and import, characterization,
//! region maps, simulation, sweeps and reports.
//!
//! Exit status is 0 on success, 1 for usage or validation errors and 2 for
//! internal failures.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Parser;

mod args;
mod commands;
pub mod config;
mod report;
mod sweep;

use args::{Cli, Command};

pub use config::RunConfig;

/// Marks a failure that no input could have caused.
#[derive(Debug, thiserror::Error)]
#[error("internal error: {0}")]
pub struct Internal(pub String);

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { 1 } else { 0 };
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
        Err(_) => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ProfileGen(a) => commands::profile_gen(a),
        Command::ProfileImport(a) => commands::profile_import(a),
        Command::Characterize(a) => commands::characterize(a),
        Command::Regionmap(a) => commands::regionmap(a),
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Sweep(a) => sweep::sweep(a),
        Command::Report(a) => report::report(a),
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<Internal>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<flydram::Error>() {
            return match e {
                flydram::Error::Protocol { .. } | flydram::Error::TimingViolation { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Creates `path`, and its parent directories.
pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// `p.csv` -> `p.weak.csv`; `p` -> `p.weak`.
pub fn weak_sibling(path: &Path) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.weak.{}", ext.to_string_lossy()),
        None => format!("{stem}.weak"),
    };
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weak_sibling_names() {
        assert_eq!(weak_sibling(Path::new("out/p.csv")), PathBuf::from("out/p.weak.csv"));
        assert_eq!(weak_sibling(Path::new("p")), PathBuf::from("p.weak"));
    }

    #[test]
    fn exit_codes() {
        let validation = anyhow::Error::new(flydram::Error::param("x")).context("while loading");
        assert_eq!(exit_code(&validation), 1);
        assert_eq!(exit_code(&anyhow::Error::new(Internal("x".into()))), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("plain")), 1);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(dispatch(["flydram", "no-such-command"]), 1);
        assert_eq!(dispatch(["flydram", "profile-gen", "--bogus"]), 1);
        assert_eq!(dispatch(["flydram", "--help"]), 0);
    }
}
