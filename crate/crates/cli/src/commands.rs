use std::io::Write;

use anyhow::{bail, Context, Result};
use flydram::controller::{
    build_region_map, compress_slow_set, export_region_map, import_region_map, Granularity, LatencySteps, Policy,
    RegionMap, TimingSource,
};
use flydram::device::{
    export_profile, export_weak_bits, generate_profile, import_profile, DataPattern, LatencyProfile, OpKind,
    TimingParams, VariationParams,
};
use flydram::profiler::{
    ecc_correctable_fraction, run_characterization, spatial_locality_score, write_ber_csv, write_error_map_csv,
    EccScheme, Param, SweepConfig,
};
use flydram::rng::derive_seed;
use flydram::simkit::{
    allocate_pages, fingerprint, gen_trace, profile_fingerprint, read_trace, remap_trace, simulate, write_stats_csv,
    write_trace, MemoryTrace, RunRecord, SimConfig,
};
use flydram::{Geometry, Latency};

use crate::args::{
    CharacterizeArgs, Mode, ProfileGenArgs, ProfileImportArgs, ProfileInput, RegionmapArgs, SimulateArgs,
};
use crate::{create, open, weak_sibling};

pub const ECC_MAGIC: &str = "#flydram-ecc v1";
pub const SPATIAL_MAGIC: &str = "#flydram-spatial v1";

const SPATIAL_KEY: u64 = 0x7370_6174;

pub(crate) fn load_profile(input: &ProfileInput) -> Result<LatencyProfile> {
    let weak = match &input.weak {
        Some(p) => Some(p.clone()),
        None => Some(weak_sibling(&input.profile)).filter(|p| p.exists()),
    };
    let weak_reader = weak.as_deref().map(open).transpose()?;
    import_profile(open(&input.profile)?, weak_reader)
        .with_context(|| format!("reading profile {}", input.profile.display()))
}

fn save_profile(profile: &LatencyProfile, out: &std::path::Path, weak_out: Option<&std::path::Path>) -> Result<()> {
    export_profile(profile, create(out)?).with_context(|| format!("writing {}", out.display()))?;
    let weak = weak_out.map_or_else(|| weak_sibling(out), |p| p.to_path_buf());
    export_weak_bits(profile, create(&weak)?).with_context(|| format!("writing {}", weak.display()))?;
    Ok(())
}

fn describe_profile(profile: &LatencyProfile) -> String {
    format!(
        "{} cache lines, {} weak bits, max tRCD {} ns, max tRP {} ns, max tRAS {} ns",
        profile.geometry().total_lines(),
        profile.all_weak_bits().len(),
        profile.max_required(OpKind::Activation),
        profile.max_required(OpKind::Precharge),
        profile.max_required(OpKind::Restoration),
    )
}

pub(crate) fn profile_gen(a: ProfileGenArgs) -> Result<()> {
    let geometry = a.geometry.apply(Geometry::default());
    let params = a.variation.apply(VariationParams::default());
    let profile = generate_profile(&geometry, &params, a.seed)?;
    save_profile(&profile, &a.out, a.weak_out.as_deref())?;
    println!("{}", describe_profile(&profile));
    Ok(())
}

pub(crate) fn profile_import(a: ProfileImportArgs) -> Result<()> {
    let profile = load_profile(&a.input)?;
    save_profile(&profile, &a.out, a.weak_out.as_deref())?;
    println!("{}", describe_profile(&profile));
    Ok(())
}

pub(crate) fn characterize(a: CharacterizeArgs) -> Result<()> {
    let profile = load_profile(&a.input)?;
    let mut sweep = SweepConfig::default();
    if !(a.trcd.is_empty() && a.trp.is_empty() && a.tras.is_empty()) {
        for (param, mut values) in [(Param::Trcd, a.trcd), (Param::Trp, a.trp), (Param::Tras, a.tras)] {
            values.sort_unstable();
            values.dedup();
            *sweep.values_mut(param) = values;
        }
    }
    if !a.patterns.is_empty() {
        sweep.patterns = a.patterns;
    }
    if let Some(r) = a.rounds {
        sweep.rounds = r;
    }
    let result = run_characterization(&profile, &sweep, a.seed)?;
    write_ber_csv(&result.table, create(&a.out)?).with_context(|| format!("writing {}", a.out.display()))?;

    if let Some(dir) = &a.maps_dir {
        for p in &result.points {
            let path = dir.join(format!("errmap_{}_{}.csv", p.point.param, p.point.value));
            write_error_map_csv(&p.error_map, p.point, create(&path)?)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if let Some(path) = &a.ecc_out {
        let mut w = create(path)?;
        writeln!(w, "{ECC_MAGIC}")?;
        writeln!(w, "param,value_ns,beats,erroneous_beats,single_bit_beats,multi_bit_beats,secded_corrected,correctable_fraction,degenerate")?;
        for p in &result.points {
            let f = ecc_correctable_fraction(&p.beats, EccScheme::Secded64)?;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                p.point.param,
                p.point.value,
                p.beats.beats(),
                p.beats.erroneous_beats(),
                p.beats.freq(1),
                p.beats.multi_bit_beats(),
                p.secded_corrected,
                f.ratio,
                f.degenerate
            )?;
        }
        w.flush()?;
    }
    if let Some(path) = &a.spatial_out {
        let mut w = create(path)?;
        writeln!(w, "{SPATIAL_MAGIC}")?;
        writeln!(w, "param,value_ns,erroneous_lines,score,p_value,permutations,degenerate")?;
        for (i, p) in result.points.iter().enumerate() {
            let s = spatial_locality_score(&p.error_map, a.permutations, derive_seed(a.seed, &[SPATIAL_KEY, i as u64]));
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.point.param,
                p.point.value,
                p.error_map.cells().len(),
                s.score,
                s.p_value,
                s.permutations,
                s.degenerate
            )?;
        }
        w.flush()?;
    }

    for p in &result.points {
        let (e, t) = result
            .table
            .rows
            .iter()
            .filter(|r| r.param == p.point.param && r.value == p.point.value)
            .fold((0u64, 0u64), |(e, t), r| (e + r.bit_errors, t + r.bits_tested));
        println!("{} {} ns: {e} bit errors in {t} bits tested", p.point.param, p.point.value);
    }
    Ok(())
}

pub(crate) fn regionmap(a: RegionmapArgs) -> Result<()> {
    let profile = load_profile(&a.input)?;
    let map = build_region_map(&profile, a.granularity, &LatencySteps::ddr3_default(), a.guardband)?;
    export_region_map(&map, create(&a.out)?).with_context(|| format!("writing {}", a.out.display()))?;
    let slow = (0..map.region_count()).filter(|&r| map.is_slow(r)).count();
    println!(
        "{} regions at {}, {slow} slower than the fastest step, {} bytes",
        map.region_count(),
        map.granularity(),
        map.storage_bytes()
    );
    if let Some(fp) = a.fp_rate {
        let filter = compress_slow_set(&map, fp)?;
        println!(
            "slow-set filter: {} bits, {} hashes, {} bytes",
            filter.bit_count(),
            filter.hash_count(),
            filter.storage_bytes()
        );
    }
    Ok(())
}

/// Everything about one simulation except the trace and the profile.
#[derive(Clone, Debug)]
pub(crate) struct RunSpec {
    pub label: String,
    pub mode: Mode,
    pub granularity: Granularity,
    pub guardband: u32,
    pub fp_rate: f64,
    pub mlp: u32,
    pub policy: Policy,
    pub pattern: DataPattern,
    pub ecc: bool,
    pub allocate: bool,
    pub seed: u64,
}

impl RunSpec {
    /// Stable identity of the configuration, independent of trace and profile.
    fn config_fingerprint(&self, sim: &SimConfig, map_from_file: bool) -> String {
        let source = match self.mode {
            Mode::Baseline => String::new(),
            _ if map_from_file => format!(" map=file allocate={}", self.allocate),
            Mode::Flydram => {
                format!(" granularity={} guardband={} allocate={}", self.granularity, self.guardband, self.allocate)
            }
            Mode::FlydramFilter => format!(
                " granularity={} guardband={} fp_rate={} allocate={}",
                self.granularity, self.guardband, self.fp_rate, self.allocate
            ),
        };
        fingerprint(format!("{}{source}", sim.describe()).as_bytes())
    }
}

/// Runs one simulation; returns the record and the trace actually replayed.
pub(crate) fn run_one(
    spec: &RunSpec,
    trace: &MemoryTrace,
    profile: &LatencyProfile,
    map: Option<RegionMap>,
) -> Result<(RunRecord, Option<MemoryTrace>)> {
    let map_from_file = map.is_some();
    let map = match (spec.mode, map) {
        (Mode::Baseline, _) => None,
        (_, Some(m)) => Some(m),
        (_, None) => Some(build_region_map(profile, spec.granularity, &LatencySteps::ddr3_default(), spec.guardband)?),
    };
    let remapped = match (&map, spec.allocate) {
        (None, true) => bail!("page allocation needs a region map; use a flydram mode"),
        (Some(m), true) => {
            let placement = allocate_pages(&trace.page_hotness(profile.geometry())?, m, profile.geometry())?;
            Some(remap_trace(trace, &placement)?)
        }
        _ => None,
    };
    let source = match (spec.mode, map) {
        (Mode::Baseline, _) => TimingSource::Uniform(TimingParams::ddr3_1333h()),
        (Mode::Flydram, Some(m)) => TimingSource::Map(m),
        (Mode::FlydramFilter, Some(m)) => TimingSource::Filter(compress_slow_set(&m, spec.fp_rate)?),
        (_, None) => unreachable!("flydram modes always carry a map"),
    };
    let mut config = SimConfig::new(source);
    config.mlp_limit = spec.mlp as usize;
    config.policy = spec.policy;
    config.pattern = spec.pattern;
    config.ecc = spec.ecc;
    config.seed = spec.seed;
    let stats = simulate(remapped.as_ref().unwrap_or(trace), profile, &config)?;
    let record = RunRecord {
        label: spec.label.clone(),
        mode: config.source.mode().to_string(),
        config_fingerprint: spec.config_fingerprint(&config, map_from_file),
        profile_fingerprint: profile_fingerprint(profile),
        stats,
    };
    Ok((record, remapped))
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Baseline => "baseline",
        Mode::Flydram => "flydram",
        Mode::FlydramFilter => "flydram-filter",
    }
}

pub(crate) fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let profile = match &a.profile {
        Some(path) => {
            let p = load_profile(&ProfileInput { profile: path.clone(), weak: a.weak.clone() })?;
            if a.geometry.any() && a.geometry.apply(*p.geometry()) != *p.geometry() {
                bail!("geometry flags disagree with the profile's geometry");
            }
            p
        }
        None => {
            let g = a.geometry.apply(Geometry::default());
            let spec = TimingParams::ddr3_1333h();
            LatencyProfile::uniform(g, spec.trcd(), spec.trp(), spec.tras(), Latency::ZERO)?
        }
    };
    let geometry = *profile.geometry();
    let trace = match &a.trace {
        Some(path) => read_trace(open(path)?).with_context(|| format!("reading trace {}", path.display()))?,
        None => gen_trace(a.workload, a.length, a.mlp, a.seed, &geometry)?,
    };
    let map = match &a.map {
        Some(path) => {
            if a.mode == Mode::Baseline {
                bail!("--map only applies to flydram modes");
            }
            let m = import_region_map(open(path)?, &geometry, &TimingParams::ddr3_1333h())
                .with_context(|| format!("reading region map {}", path.display()))?;
            Some(m)
        }
        None if a.mode != Mode::Baseline && a.profile.is_none() => {
            bail!("flydram modes need --profile or --map");
        }
        None => None,
    };
    let granularity = map.as_ref().map_or(a.granularity, |m| m.granularity());
    let spec = RunSpec {
        label: a.label.clone().unwrap_or_else(|| mode_name(a.mode).to_string()),
        mode: a.mode,
        granularity,
        guardband: a.guardband,
        fp_rate: a.fp_rate,
        mlp: a.mlp,
        policy: a.policy,
        pattern: a.pattern,
        ecc: a.ecc,
        allocate: a.allocate,
        seed: a.seed,
    };
    let (record, remapped) = run_one(&spec, &trace, &profile, map)?;
    if let Some(path) = &a.trace_out {
        write_trace(remapped.as_ref().unwrap_or(&trace), create(path)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    write_stats_csv(std::slice::from_ref(&record), create(&a.out)?)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let s = &record.stats;
    println!(
        "{}: {} requests, {} cycles, avg read latency {} cycles, p99 {}, row hits {}, {} bit flips",
        record.label,
        s.requests_served,
        s.total_cycles,
        s.avg_read_latency_cyc,
        s.p99_read_latency_cyc,
        s.row_hit_rate,
        s.injected_bit_flips
    );
    Ok(())
}
