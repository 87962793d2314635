use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use flydram::device::{generate_profile, LatencyProfile};
use flydram::rng::derive_seed;
use flydram::simkit::{gen_trace, write_stats_csv, MemoryTrace};
use rayon::prelude::*;

use crate::args::{Mode, ProfileInput, SweepArgs};
use crate::commands::{load_profile, run_one, RunSpec};
use crate::config::{Resolved, RunConfig};
use crate::{create, Internal};

const PROFILE_KEY: u64 = 0x7072_6f66;
const TRACE_KEY: u64 = 0x7472_6163;
const SIM_KEY: u64 = 0x0073_696d;

fn jobs(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("FLYDRAM_JOBS") {
            Ok(v) => v.trim().parse().map_err(|_| anyhow!("FLYDRAM_JOBS=`{v}` is not a count"))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        bail!("--jobs must be positive");
    }
    Ok(n)
}

/// Run specs for one profile, in output order.
fn specs(cfg: &RunConfig, r: &Resolved, seed: u64) -> Vec<(usize, RunSpec)> {
    let mut out = Vec::new();
    for (k, kind) in r.kinds.iter().enumerate() {
        for &mode in &r.modes {
            let grans: Vec<_> =
                if mode == Mode::Baseline { vec![None] } else { r.granularities.iter().map(Some).collect() };
            for gr in grans {
                let label = match (mode, gr) {
                    (Mode::Baseline, _) => format!("{kind}/baseline"),
                    (m, Some(g)) => {
                        format!("{kind}/{}/{g}", if m == Mode::Flydram { "flydram" } else { "flydram-filter" })
                    }
                    (_, None) => unreachable!(),
                };
                out.push((
                    k,
                    RunSpec {
                        label,
                        mode,
                        granularity: gr.copied().unwrap_or(flydram::controller::Granularity::Row),
                        guardband: cfg.controller.guardband,
                        fp_rate: cfg.controller.fp_rate,
                        mlp: cfg.trace.mlp,
                        policy: r.policy,
                        pattern: r.pattern,
                        ecc: cfg.controller.ecc,
                        allocate: cfg.controller.allocate && mode != Mode::Baseline,
                        seed: derive_seed(seed, &[SIM_KEY]),
                    },
                ));
            }
        }
    }
    out
}

pub(crate) fn sweep(a: SweepArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let Some(seed) = a.seed.or(cfg.seed) else {
        bail!("sweep requires an explicit seed (--seed or `seed` in the configuration)");
    };
    let out_dir: PathBuf = a
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| anyhow!("sweep requires --out-dir or `out_dir` in the configuration"))?;
    let jobs = jobs(a.jobs)?;
    let r = cfg.resolve()?;
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Internal(format!("thread pool: {e}")))?;

    let profile_count = if cfg.profile_files.is_empty() { cfg.profiles as usize } else { cfg.profile_files.len() };
    let load = |i: usize| -> Result<LatencyProfile> {
        match cfg.profile_files.get(i) {
            Some(path) => load_profile(&ProfileInput { profile: path.clone(), weak: None }),
            None => Ok(generate_profile(&r.geometry, &r.variation, derive_seed(seed, &[PROFILE_KEY, i as u64]))?),
        }
    };
    let specs = specs(&cfg, &r, seed);
    let mut written = 0usize;
    for p in 0..profile_count {
        let profile = load(p)?;
        let geometry = *profile.geometry();
        let traces: Vec<MemoryTrace> = r
            .kinds
            .iter()
            .enumerate()
            .map(|(k, &kind)| {
                gen_trace(kind, cfg.trace.length, cfg.trace.mlp, derive_seed(seed, &[TRACE_KEY, k as u64]), &geometry)
            })
            .collect::<flydram::Result<_>>()?;
        pool.install(|| {
            specs.par_iter().enumerate().try_for_each(|(i, (k, spec))| -> Result<()> {
                let (record, _) = run_one(spec, &traces[*k], &profile, None)
                    .with_context(|| format!("profile {p}, run {}", spec.label))?;
                let path = out_dir.join(format!("run-p{p:03}-{i:03}.csv"));
                write_stats_csv(std::slice::from_ref(&record), create(&path)?)
                    .with_context(|| format!("writing {}", path.display()))
            })
        })?;
        written += specs.len();
    }
    println!("{written} runs written to {}", out_dir.display());
    Ok(())
}
