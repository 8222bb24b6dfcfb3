use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use elevspace::io::SeriesTable;
use elevspace::StrideAnalysis;

use crate::config::PlotFormat;
use crate::pipeline::TrialResult;
use crate::plot::{line_plot, plane_projection, Series};

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("moving {} into place", path.display()))?;
    Ok(())
}

/// Which per-stride files to emit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Outputs {
    pub elevation: bool,
    pub scores: bool,
    pub esm: bool,
    pub power: bool,
}

pub fn percent_axis(n: usize) -> Vec<f64> {
    (0..n).map(|k| 100.0 * k as f64 / (n - 1).max(1) as f64).collect()
}

fn deg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.to_degrees()).collect()
}

pub fn elevation_table(s: &StrideAnalysis) -> SeriesTable {
    let e = &s.elevation;
    SeriesTable::new()
        .with("percent", percent_axis(e.len()))
        .with("pelvis_deg", deg(&e.pelvis))
        .with("thigh_deg", deg(&e.thigh))
        .with("shank_deg", deg(&e.shank))
        .with("foot_deg", deg(&e.foot))
        .with("thigh_rate_dps", deg(&e.thigh_rate))
        .with("shank_rate_dps", deg(&e.shank_rate))
        .with("foot_rate_dps", deg(&e.foot_rate))
}

fn scores_table(scores: &[[f64; 3]]) -> SeriesTable {
    let mut t = SeriesTable::new().with("percent", percent_axis(scores.len()));
    for i in 0..3 {
        t.push(format!("pc{}", i + 1), scores.iter().map(|s| s[i]).collect());
    }
    t
}

/// Writes the requested CSVs and plots for one trial under `out/<id>/`.
pub fn write_trial_outputs(out: &Path, t: &TrialResult, what: Outputs, plots: PlotFormat) -> Result<Vec<PathBuf>> {
    let dir = out.join(&t.id);
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, body.as_bytes())?;
        written.push(p);
        Ok(())
    };
    let svg = plots == PlotFormat::Svg;
    for s in &t.strides {
        let tag = format!("stride_{:02}", s.index);
        if what.elevation {
            put(format!("{tag}_elevation.csv"), elevation_table(s).to_csv_string())?;
        }
        if what.scores {
            if let Some(sc) = &s.angle_scores {
                put(format!("{tag}_angle_scores.csv"), scores_table(&sc.scores).to_csv_string())?;
            }
            if let Some(sc) = s.esm_scores.as_ref().filter(|_| what.esm) {
                put(format!("{tag}_esm_scores.csv"), scores_table(&sc.scores).to_csv_string())?;
            }
        }
        if what.esm {
            if let Some(m) = &s.esm {
                let t = SeriesTable::new()
                    .with("percent", percent_axis(m.len()))
                    .with("m_thigh_Nm_kg", m.thigh.clone())
                    .with("m_shank_Nm_kg", m.shank.clone())
                    .with("m_foot_Nm_kg", m.foot.clone());
                put(format!("{tag}_esm.csv"), t.to_csv_string())?;
            }
        }
        if what.power {
            if let Some(p) = &s.power {
                let t = SeriesTable::new()
                    .with("percent", percent_axis(p.joint_power.len()))
                    .with("joint_power_W_kg", p.joint_power.clone())
                    .with("esm_power_W_kg", p.esm_power.clone());
                put(format!("{tag}_power.csv"), t.to_csv_string())?;
            }
        }
    }

    if let Some(c) = &t.mean_curves {
        let x = percent_axis(c.thigh.len());
        if what.elevation {
            let table = SeriesTable::new()
                .with("percent", x.clone())
                .with("thigh_deg", c.thigh.clone())
                .with("shank_deg", c.shank.clone())
                .with("foot_deg", c.foot.clone());
            put("mean_elevation.csv".into(), table.to_csv_string())?;
            if svg {
                let series = [
                    Series { name: "thigh", x: &x, y: &c.thigh },
                    Series { name: "shank", x: &x, y: &c.shank },
                    Series { name: "foot", x: &x, y: &c.foot },
                ];
                put(
                    "elevation.svg".into(),
                    line_plot(&format!("{}: mean elevation angles", t.id), "gait cycle (%)", "deg", &series),
                )?;
            }
        }
        if what.scores {
            if let Some(plane) = &t.mean_stride_plane {
                put(
                    "cvp.json".into(),
                    serde_json::to_string_pretty(plane).expect("plane serializes") + "\n",
                )?;
                if svg {
                    let pts = c.points();
                    let scores = elevspace::coordination::pc_scores(&pts, &plane.model)?;
                    put(
                        "cvp_projection.svg".into(),
                        plane_projection(&format!("{} elevation angles", t.id), &scores.scores),
                    )?;
                    let pc: [Vec<f64>; 3] = std::array::from_fn(|i| scores.scores.iter().map(|s| s[i]).collect());
                    let series = [
                        Series { name: "PC1", x: &x, y: &pc[0] },
                        Series { name: "PC2", x: &x, y: &pc[1] },
                        Series { name: "PC3", x: &x, y: &pc[2] },
                    ];
                    put(
                        "pc_scores.svg".into(),
                        line_plot(&format!("{}: PC scores", t.id), "gait cycle (%)", "deg", &series),
                    )?;
                }
            }
        }
    }

    if svg && what.esm {
        if let Some(m) = t.strides.iter().find_map(|s| s.esm.as_ref()) {
            let x = percent_axis(m.len());
            let series = [
                Series { name: "M thigh", x: &x, y: &m.thigh },
                Series { name: "M shank", x: &x, y: &m.shank },
                Series { name: "M foot", x: &x, y: &m.foot },
            ];
            put(
                "esm.svg".into(),
                line_plot(&format!("{}: elevation space moments (first stride)", t.id), "gait cycle (%)", "Nm/kg", &series),
            )?;
        }
    }
    if svg && what.power {
        if let Some(p) = t.strides.iter().find_map(|s| s.power.as_ref()) {
            let x = percent_axis(p.joint_power.len());
            let series = [
                Series { name: "joint", x: &x, y: &p.joint_power },
                Series { name: "elevation", x: &x, y: &p.esm_power },
            ];
            put(
                "power.svg".into(),
                line_plot(&format!("{}: power (first stride)", t.id), "gait cycle (%)", "W/kg", &series),
            )?;
        }
    }
    Ok(written)
}
