use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use elevspace::io::{LoadOptions, MomentUnits};
use elevspace::jacobian::{EsmOptions, PelvisColumns, SVD_RTOL};
use elevspace::{AnalysisOptions, Laterality};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlotFormat {
    #[default]
    Svg,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub angles: bool,
    pub esm: bool,
    pub power_check: bool,
    pub prediction: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self {
            angles: true,
            esm: true,
            power_check: true,
            prediction: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative singular-value cutoff of the ESM pseudo-inverse.
    pub svd_rtol: f64,
    /// Fraction trimmed from each end of the swing window.
    pub swing_trim: f64,
    /// ESM moving-average window in grid samples; 0 disables.
    pub esm_smoothing: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            svd_rtol: SVD_RTOL,
            swing_trim: 0.0,
            esm_smoothing: 0,
        }
    }
}

/// Where the reference plane and the thigh/foot curves for shank
/// prediction come from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    /// A plane JSON written by `pca`, or a trial CSV whose mean stride is fit.
    pub cvp: Option<PathBuf>,
    pub thigh_source: Option<PathBuf>,
    pub foot_source: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Files, directories (all `*.csv` inside) or glob patterns.
    pub inputs: Vec<String>,
    pub out_dir: PathBuf,
    /// Overrides the side recorded in each trial's metadata.
    pub side: Option<Laterality>,
    pub grid: usize,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    pub strict_units: bool,
    pub moment_units: Option<MomentUnits>,
    pub plots: PlotFormat,
    pub toggles: Toggles,
    pub tolerances: Tolerances,
    pub pelvis_columns: PelvisColumns,
    pub reference: ReferenceConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            out_dir: PathBuf::from("elevspace_out"),
            side: None,
            grid: elevspace::io::DEFAULT_GRID,
            jobs: 0,
            strict_units: false,
            moment_units: None,
            plots: PlotFormat::Svg,
            toggles: Toggles::default(),
            tolerances: Tolerances::default(),
            pelvis_columns: PelvisColumns::Excluded,
            reference: ReferenceConfig::default(),
        }
    }
}

impl AnalysisConfig {
    /// Reads TOML, or JSON. A JSON report is accepted too: its `config`
    /// echo is used.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            let mut v: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if let Some(inner) = v.get_mut("config") {
                v = inner.take();
            }
            serde_json::from_value(v).with_context(|| format!("invalid config in {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            bail!("no input given");
        }
        if self.grid < 11 {
            bail!("grid must have at least 11 points, got {}", self.grid);
        }
        let t = &self.tolerances;
        if !(t.svd_rtol > 0.0 && t.svd_rtol < 1.0) {
            bail!("svd_rtol must lie in (0, 1), got {}", t.svd_rtol);
        }
        if !(0.0..0.5).contains(&t.swing_trim) {
            bail!("swing_trim must lie in [0, 0.5), got {}", t.swing_trim);
        }
        if t.esm_smoothing > 1 && t.esm_smoothing.is_multiple_of(2) {
            bail!("esm_smoothing must be odd, got {}", t.esm_smoothing);
        }
        if t.esm_smoothing >= self.grid {
            bail!("esm_smoothing window {} exceeds the grid", t.esm_smoothing);
        }
        Ok(())
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            strict: self.strict_units,
            side: self.side,
            moment_units: self.moment_units,
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            esm: EsmOptions {
                pelvis: self.pelvis_columns,
                rtol: self.tolerances.svd_rtol,
            },
            compute_esm: self.toggles.esm || self.toggles.power_check,
            swing_trim: self.tolerances.swing_trim,
            esm_smoothing: self.tolerances.esm_smoothing,
        }
    }
}

/// Expands files, directories and glob patterns into a sorted, de-duplicated
/// list of trial CSVs.
pub fn expand_inputs(inputs: &[String]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for item in inputs {
        let path = Path::new(item);
        if path.is_dir() {
            for entry in std::fs::read_dir(path).with_context(|| format!("listing {item}"))? {
                let p = entry?.path();
                if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                    out.push(p);
                }
            }
        } else if item.contains(['*', '?', '[']) {
            let mut n = 0;
            for p in glob::glob(item).with_context(|| format!("bad glob pattern {item}"))? {
                out.push(p?);
                n += 1;
            }
            if n == 0 {
                bail!("pattern {item} matched nothing");
            }
        } else if path.is_file() {
            out.push(path.to_path_buf());
        } else {
            bail!("input {item} does not exist");
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}
