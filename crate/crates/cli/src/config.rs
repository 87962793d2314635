//! TOML run configuration for `sweep`.
//!
//! ```toml
//! seed = 7
//! out_dir = "runs"
//! profiles = 2
//!
//! [geometry]
//! rows = 1024
//!
//! [trace]
//! kinds = ["stream", "random_uniform", "hotspot:0.1:0.9"]
//! length = 100000
//!
//! [controller]
//! modes = ["baseline", "flydram"]
//! granularities = ["row", "bank"]
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use flydram::controller::{Granularity, Policy};
use flydram::device::{DataPattern, VariationParams};
use flydram::simkit::TraceKind;
use flydram::Geometry;
use serde::Deserialize;

use crate::args::{GeometryArgs, Mode, VariationArgs};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Number of generated profiles; ignored when `profile_files` is set.
    pub profiles: u32,
    /// Existing profiles to use instead of generated ones.
    pub profile_files: Vec<PathBuf>,
    pub geometry: GeometryConfig,
    pub generator: GeneratorConfig,
    pub trace: TraceConfig,
    pub controller: ControllerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            out_dir: None,
            profiles: 1,
            profile_files: Vec::new(),
            geometry: GeometryConfig::default(),
            generator: GeneratorConfig::default(),
            trace: TraceConfig::default(),
            controller: ControllerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub channels: Option<u32>,
    pub ranks: Option<u32>,
    pub banks: Option<u32>,
    pub rows: Option<u32>,
    pub cachelines: Option<u32>,
    pub line_bytes: Option<u32>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub clusters: Option<u32>,
    pub cluster_radius: Option<f64>,
    pub cluster_depth: Option<f64>,
    pub fast_fraction: Option<f64>,
    pub pattern_penalty: Option<f64>,
    pub jitter: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    pub kinds: Vec<String>,
    pub length: usize,
    pub mlp: u32,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            kinds: vec!["stream".into(), "random_uniform".into(), "hotspot:0.1:0.9".into()],
            length: 100_000,
            mlp: 4,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub modes: Vec<String>,
    pub granularities: Vec<String>,
    pub guardband: u32,
    pub fp_rate: f64,
    pub policy: String,
    pub pattern: String,
    pub ecc: bool,
    /// Place hot pages in fast frames for the flydram modes.
    pub allocate: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            modes: vec!["baseline".into(), "flydram".into()],
            granularities: vec!["row".into()],
            guardband: 0,
            fp_rate: 0.01,
            policy: "frfcfs".into(),
            pattern: "all_zeros".into(),
            ecc: false,
            allocate: false,
        }
    }
}

/// A configuration with every string field parsed.
#[derive(Clone, Debug)]
pub(crate) struct Resolved {
    pub geometry: Geometry,
    pub variation: VariationParams,
    pub kinds: Vec<TraceKind>,
    pub modes: Vec<Mode>,
    pub granularities: Vec<Granularity>,
    pub policy: Policy,
    pub pattern: DataPattern,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub(crate) fn resolve(&self) -> Result<Resolved> {
        let g = &self.geometry;
        let geometry = GeometryArgs {
            channels: g.channels,
            ranks: g.ranks,
            banks: g.banks,
            rows: g.rows,
            cachelines: g.cachelines,
            line_bytes: g.line_bytes,
        }
        .apply(Geometry::default());
        geometry.validate()?;
        let v = &self.generator;
        let variation = VariationArgs {
            clusters: v.clusters,
            cluster_radius: v.cluster_radius,
            cluster_depth: v.cluster_depth,
            fast_fraction: v.fast_fraction,
            pattern_penalty: v.pattern_penalty,
            jitter: v.jitter,
        }
        .apply(VariationParams::default());
        variation.validate()?;

        let kinds = self.trace.kinds.iter().map(|k| k.parse()).collect::<flydram::Result<Vec<TraceKind>>>()?;
        let modes = self
            .controller
            .modes
            .iter()
            .map(|m| Mode::from_str(m, true).map_err(|_| anyhow::anyhow!("unknown mode `{m}`")))
            .collect::<Result<Vec<_>>>()?;
        let granularities = self
            .controller
            .granularities
            .iter()
            .map(|s| s.parse::<Granularity>().and_then(|gr| gr.validate(&geometry).map(|_| gr)))
            .collect::<flydram::Result<Vec<_>>>()?;
        if kinds.is_empty() || modes.is_empty() {
            bail!("configuration needs at least one trace kind and one mode");
        }
        if granularities.is_empty() && modes.iter().any(|&m| m != Mode::Baseline) {
            bail!("flydram modes need at least one granularity");
        }
        if self.profile_files.is_empty() && self.profiles == 0 {
            bail!("profiles must be positive");
        }
        if self.trace.length == 0 || self.trace.mlp == 0 {
            bail!("trace length and mlp must be positive");
        }
        if !(self.controller.fp_rate > 0.0 && self.controller.fp_rate < 0.5) {
            bail!("fp_rate {} outside (0, 0.5)", self.controller.fp_rate);
        }
        Ok(Resolved {
            geometry,
            variation,
            kinds,
            modes,
            granularities,
            policy: self.controller.policy.parse()?,
            pattern: self.controller.pattern.parse()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = RunConfig::default().resolve().unwrap();
        assert_eq!(RunConfig::default().profiles, toml::from_str::<RunConfig>("").unwrap().profiles);
        assert_eq!(r.geometry, Geometry::default());
        assert_eq!(r.kinds.len(), 3);
        assert_eq!(r.modes, vec![Mode::Baseline, Mode::Flydram]);
    }

    #[test]
    fn parses_and_rejects() {
        let c: RunConfig = toml::from_str(
            "seed = 3\n[geometry]\nrows = 64\n[controller]\nmodes = [\"flydram-filter\"]\ngranularities = [\"bank\"]\n",
        )
        .unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(r.geometry.rows_per_bank, 64);
        assert_eq!(r.modes, vec![Mode::FlydramFilter]);
        assert!(toml::from_str::<RunConfig>("sead = 3").is_err());
        let bad: RunConfig = toml::from_str("[controller]\nmodes = [\"turbo\"]").unwrap();
        assert!(bad.resolve().is_err());
    }
}
