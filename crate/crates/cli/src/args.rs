use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flydram::controller::{Granularity, Policy};
use flydram::device::{DataPattern, VariationParams};
use flydram::simkit::TraceKind;
use flydram::{Geometry, Latency};

#[derive(Parser, Debug)]
#[command(name = "flydram", version, about = "DRAM latency-variation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic latency profile.
    ProfileGen(ProfileGenArgs),
    /// Validate an external profile and rewrite it in canonical form.
    ProfileImport(ProfileImportArgs),
    /// Sweep timing parameters and record bit error rates.
    Characterize(CharacterizeArgs),
    /// Build a conservative per-region timing map.
    Regionmap(RegionmapArgs),
    /// Replay one trace through the controller.
    Simulate(SimulateArgs),
    /// Run a grid of simulations from a run configuration.
    Sweep(SweepArgs),
    /// Aggregate stats and BER files into summary and plot-data tables.
    Report(ReportArgs),
}

/// Geometry overrides; unset fields keep the base geometry.
#[derive(Args, Debug, Clone, Default)]
pub struct GeometryArgs {
    #[arg(long)]
    pub channels: Option<u32>,
    #[arg(long)]
    pub ranks: Option<u32>,
    #[arg(long)]
    pub banks: Option<u32>,
    #[arg(long)]
    pub rows: Option<u32>,
    #[arg(long)]
    pub cachelines: Option<u32>,
    #[arg(long)]
    pub line_bytes: Option<u32>,
}

impl GeometryArgs {
    pub fn any(&self) -> bool {
        [self.channels, self.ranks, self.banks, self.rows, self.cachelines, self.line_bytes].iter().any(Option::is_some)
    }

    pub fn apply(&self, base: Geometry) -> Geometry {
        Geometry {
            channels: self.channels.unwrap_or(base.channels),
            ranks_per_channel: self.ranks.unwrap_or(base.ranks_per_channel),
            banks_per_rank: self.banks.unwrap_or(base.banks_per_rank),
            rows_per_bank: self.rows.unwrap_or(base.rows_per_bank),
            cachelines_per_row: self.cachelines.unwrap_or(base.cachelines_per_row),
            cacheline_bytes: self.line_bytes.unwrap_or(base.cacheline_bytes),
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct VariationArgs {
    /// Gaussian clusters per bank.
    #[arg(long)]
    pub clusters: Option<u32>,
    /// Cluster standard deviation in row and cache-line units.
    #[arg(long)]
    pub cluster_radius: Option<f64>,
    /// Cluster peak height in ns.
    #[arg(long)]
    pub cluster_depth: Option<f64>,
    /// Fraction of cache lines left at the fast floor.
    #[arg(long)]
    pub fast_fraction: Option<f64>,
    /// Extra threshold in ns of a weak bit storing zero.
    #[arg(long)]
    pub pattern_penalty: Option<f64>,
    /// Per-read threshold noise in ns.
    #[arg(long)]
    pub jitter: Option<f64>,
}

impl VariationArgs {
    pub fn apply(&self, base: VariationParams) -> VariationParams {
        VariationParams {
            cluster_count: self.clusters.unwrap_or(base.cluster_count),
            cluster_radius: self.cluster_radius.unwrap_or(base.cluster_radius),
            cluster_depth_ns: self.cluster_depth.unwrap_or(base.cluster_depth_ns),
            base_fast_fraction: self.fast_fraction.unwrap_or(base.base_fast_fraction),
            pattern_penalty_ns: self.pattern_penalty.unwrap_or(base.pattern_penalty_ns),
            jitter_sigma_ns: self.jitter.unwrap_or(base.jitter_sigma_ns),
        }
    }
}

#[derive(Args, Debug)]
pub struct ProfileInput {
    /// Latency profile CSV.
    #[arg(long)]
    pub profile: PathBuf,
    /// Weak-bit CSV; defaults to the `.weak` sibling of the profile if present.
    #[arg(long)]
    pub weak: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProfileGenArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Weak-bit output; defaults to the `.weak` sibling of `--out`.
    #[arg(long)]
    pub weak_out: Option<PathBuf>,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub variation: VariationArgs,
}

#[derive(Args, Debug)]
pub struct ProfileImportArgs {
    #[command(flatten)]
    pub input: ProfileInput,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub weak_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CharacterizeArgs {
    #[command(flatten)]
    pub input: ProfileInput,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// tRCD values in ns. Naming any parameter restricts the sweep to the named ones.
    #[arg(long, value_delimiter = ',')]
    pub trcd: Vec<Latency>,
    #[arg(long, value_delimiter = ',')]
    pub trp: Vec<Latency>,
    #[arg(long, value_delimiter = ',')]
    pub tras: Vec<Latency>,
    #[arg(long, value_delimiter = ',')]
    pub patterns: Vec<DataPattern>,
    #[arg(long)]
    pub rounds: Option<u32>,
    /// BER table output.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for one error-map CSV per sweep point.
    #[arg(long)]
    pub maps_dir: Option<PathBuf>,
    /// Per-point ECC summary output.
    #[arg(long)]
    pub ecc_out: Option<PathBuf>,
    /// Per-point spatial-locality scores output.
    #[arg(long)]
    pub spatial_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub permutations: u32,
}

#[derive(Args, Debug)]
pub struct RegionmapArgs {
    #[command(flatten)]
    pub input: ProfileInput,
    #[arg(long, default_value = "row")]
    pub granularity: Granularity,
    /// Extra latency steps added to every region.
    #[arg(long, default_value_t = 0)]
    pub guardband: u32,
    #[arg(long)]
    pub out: PathBuf,
    /// Also report the size of a slow-set filter at this false-positive rate.
    #[arg(long)]
    pub fp_rate: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Baseline,
    Flydram,
    FlydramFilter,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Profile used for error injection; without one the device meets vendor timings exactly.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, requires = "profile")]
    pub weak: Option<PathBuf>,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Trace file; a synthetic workload is generated when absent.
    #[arg(long, conflicts_with_all = ["workload", "length"])]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value = "random_uniform")]
    pub workload: TraceKind,
    #[arg(long, default_value_t = 100_000)]
    pub length: usize,
    /// Writes the replayed trace, after any page allocation.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Baseline)]
    pub mode: Mode,
    /// Region map CSV; built from the profile when absent.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long, default_value = "row")]
    pub granularity: Granularity,
    #[arg(long, default_value_t = 0)]
    pub guardband: u32,
    #[arg(long, default_value_t = 0.01)]
    pub fp_rate: f64,
    #[arg(long, default_value_t = 4)]
    pub mlp: u32,
    #[arg(long, default_value = "frfcfs")]
    pub policy: Policy,
    #[arg(long, default_value = "all_zeros")]
    pub pattern: DataPattern,
    #[arg(long)]
    pub ecc: bool,
    /// Place hot pages in fast frames before replay.
    #[arg(long)]
    pub allocate: bool,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration's.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Concurrent runs; defaults to FLYDRAM_JOBS, then 1.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Stats or BER CSVs, or directories holding them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}
