//! Run configuration: JSON config files, command-line overrides, and the
//! merge of the two (flags win). The resolved configuration is echoed
//! verbatim into every report for provenance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Output format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn wants_json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
    pub fn wants_csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

/// The system slot of a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Optional grid overrides; whatever is absent is derived per hbar.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl GridOverride {
    pub fn is_empty(&self) -> bool {
        self.half_width.is_none() && self.points.is_none()
    }
}

/// The output slot of a config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// A config file, exactly as written by the user. Every field except the
/// system is optional; unknown keys are rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub system: SystemConfig,
    /// Informative only: the subcommand on the command line always wins.
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub hbar_list: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: Option<GridOverride>,
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub match_tol: Option<f64>,
    #[serde(default)]
    pub max_total: Option<usize>,
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("malformed config file {}", path.display()))
}

/// The fully merged and defaulted configuration driving one run. This is
/// what gets echoed into the report header.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub command: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub hbar_list: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridOverride>,
    pub levels: usize,
    pub seed: u64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub match_tol: Option<f64>,
    pub max_total: usize,
    pub output: OutputConfig,
}

/// Everything the flags may override. `None` means "not given".
#[derive(Debug, Default)]
pub struct FlagOverrides {
    pub system: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub hbar_list: Option<Vec<f64>>,
    pub half_width: Option<f64>,
    pub points: Option<usize>,
    pub levels: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub match_tol: Option<f64>,
    pub max_total: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Merge config file and flags (flags win), fill in defaults, and check
/// the config-level invariants. System-specific parameter validation
/// happens when the catalog builds the system.
pub fn resolve(
    command: &str,
    file: Option<FileConfig>,
    flags: FlagOverrides,
) -> Result<RunConfig> {
    let (mut system, f_hbar, f_grid, f_levels, f_output, f_seed, f_samples, f_tol, f_max) =
        match file {
            Some(f) => (
                Some(f.system),
                f.hbar_list,
                f.grid,
                f.levels,
                f.output,
                f.seed,
                f.samples,
                f.match_tol,
                f.max_total,
            ),
            None => (None, None, None, None, None, None, None, None, None),
        };

    if let Some(name) = flags.system {
        match &mut system {
            // switching systems by flag discards the file's parameters
            Some(sys) if sys.name != name => {
                *sys = SystemConfig {
                    name,
                    params: BTreeMap::new(),
                }
            }
            Some(_) => {}
            None => {
                system = Some(SystemConfig {
                    name,
                    params: BTreeMap::new(),
                })
            }
        }
    }
    let mut system = match system {
        Some(s) => s,
        None => bail!("no system selected; pass --system or a config file"),
    };
    for (key, value) in flags.params {
        system.params.insert(key, value);
    }

    let hbar_list = flags.hbar_list.or(f_hbar).unwrap_or_default();
    for (i, h) in hbar_list.iter().enumerate() {
        if !(h.is_finite() && *h > 0.0) {
            bail!("hbar values must be positive and finite, got {h}");
        }
        if hbar_list[..i].contains(h) {
            bail!("hbar list contains {h} twice");
        }
    }

    let mut grid = f_grid.unwrap_or_default();
    if flags.half_width.is_some() {
        grid.half_width = flags.half_width;
    }
    if flags.points.is_some() {
        grid.points = flags.points;
    }
    if let Some(w) = grid.half_width {
        if !(w.is_finite() && w > 0.0) {
            bail!("grid half-width must be positive and finite, got {w}");
        }
    }
    if let Some(p) = grid.points {
        if p < 16 {
            bail!("grid needs at least 16 points, got {p}");
        }
    }

    let levels = flags.levels.or(f_levels).unwrap_or(6);
    if levels == 0 {
        bail!("levels must be at least 1");
    }
    let samples = flags.samples.or(f_samples).unwrap_or(64);
    if samples == 0 {
        bail!("samples must be at least 1");
    }
    let match_tol = flags.match_tol.or(f_tol);
    if let Some(t) = match_tol {
        if !(t.is_finite() && t > 0.0) {
            bail!("match tolerance must be positive and finite, got {t}");
        }
    }
    let max_total = flags.max_total.or(f_max).unwrap_or(12);
    if max_total == 0 {
        bail!("max-total must be at least 1");
    }

    let mut output = f_output.unwrap_or_default();
    if flags.out.is_some() {
        output.prefix = flags.out;
    }
    if flags.format.is_some() {
        output.format = flags.format;
    }

    Ok(RunConfig {
        system,
        command: command.to_string(),
        hbar_list,
        grid: if grid.is_empty() { None } else { Some(grid) },
        levels,
        seed: flags.seed.or(f_seed).unwrap_or(42),
        samples,
        match_tol,
        max_total,
        output,
    })
}
