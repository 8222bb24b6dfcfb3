use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use elevspace::analysis::{analyze_stride, elevation_points_deg, mean_curve, StrideAnalysis};
use elevspace::coordination::{pc_scores, predict_shank, shank_foot_fit, LinearCouplingFit, MeanSd, PlaneConstraint, SwingWindow};
use elevspace::io::{load_trial, resolve_events, segment_strides, Condition, EventSource, Leg, RejectedStride, TrialRecord};
use elevspace::{fit_cvp, CvpModel, Laterality};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, Toggles};

/// Mean elevation angles across strides, degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCurves {
    pub thigh: Vec<f64>,
    pub shank: Vec<f64>,
    pub foot: Vec<f64>,
}

impl MeanCurves {
    pub fn points(&self) -> Vec<[f64; 3]> {
        (0..self.thigh.len())
            .map(|k| [self.thigh[k], self.shank[k], self.foot[k]])
            .collect()
    }
}

/// A covariation plane with the spread of its own fitting data around it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePlane {
    pub source: String,
    pub model: CvpModel,
    /// `max |s3|` of the fitting trajectory, degrees.
    pub max_out_of_plane_deg: f64,
}

impl ReferencePlane {
    pub fn fit(source: &str, curves: &MeanCurves) -> Result<Self> {
        let pts = curves.points();
        let model = fit_cvp(&pts).with_context(|| format!("fitting plane to {source}"))?;
        let scores = pc_scores(&pts, &model)?;
        Ok(Self {
            source: source.to_string(),
            model,
            max_out_of_plane_deg: scores.max_out_of_plane,
        })
    }

    pub fn constraint(&self) -> PlaneConstraint {
        PlaneConstraint::from_model(&self.model)
    }
}

/// Shank prediction from a plane and thigh/foot curves, compared with an
/// observed shank curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionCheck {
    pub reference: String,
    pub max_abs_residual_deg: f64,
    pub rms_residual_deg: f64,
    pub reference_max_out_of_plane_deg: f64,
    /// Shank component of the plane normal.
    pub normal_shank: f64,
    /// Largest residual compatible with the plane: `max|s3| / |n_s|`.
    pub residual_bound_deg: f64,
    /// Largest `|n · x − d|` over the predicted points.
    pub max_plane_violation: f64,
    #[serde(skip)]
    pub predicted: Vec<f64>,
}

pub fn check_prediction(reference: &ReferencePlane, thigh: &[f64], foot: &[f64], shank: &[f64]) -> Result<PredictionCheck> {
    let plane = reference.constraint();
    let predicted = predict_shank(&plane, thigh, foot)?;
    let residuals: Vec<f64> = predicted
        .iter()
        .zip(shank)
        .map(|(p, s)| p - s)
        .filter(|r| r.is_finite())
        .collect();
    let max_abs = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len().max(1) as f64).sqrt();
    let violation = (0..predicted.len())
        .map(|k| plane.residual([thigh[k], predicted[k], foot[k]]).abs())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let n_s = plane.normal[1];
    Ok(PredictionCheck {
        reference: reference.source.clone(),
        max_abs_residual_deg: max_abs,
        rms_residual_deg: rms,
        reference_max_out_of_plane_deg: reference.max_out_of_plane_deg,
        normal_shank: n_s,
        residual_bound_deg: reference.max_out_of_plane_deg / n_s.abs(),
        max_plane_violation: violation,
        predicted,
    })
}

/// Per-trial means of stride statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub angle_pi: Option<MeanSd>,
    pub esm_pi: Option<MeanSd>,
    pub slope: Option<MeanSd>,
    pub bias_deg: Option<MeanSd>,
    pub fit_r_squared: Option<MeanSd>,
    pub power_r_squared: Option<MeanSd>,
    pub power_nrmse: Option<MeanSd>,
}

impl TrialStats {
    pub fn of(strides: &[StrideAnalysis]) -> Self {
        let collect = |f: &dyn Fn(&StrideAnalysis) -> Option<f64>| -> Option<MeanSd> {
            let v: Vec<f64> = strides.iter().filter_map(f).filter(|v| v.is_finite()).collect();
            MeanSd::of(&v)
        };
        Self {
            angle_pi: collect(&|s| s.angle_cvp.map(|m| m.planarity_index)),
            esm_pi: collect(&|s| s.esm_cvp.map(|m| m.planarity_index)),
            slope: collect(&|s| s.shank_foot.map(|f| f.slope)),
            bias_deg: collect(&|s| s.shank_foot.map(|f| f.bias)),
            fit_r_squared: collect(&|s| s.shank_foot.map(|f| f.r_squared)),
            power_r_squared: collect(&|s| s.power_r_squared),
            power_nrmse: collect(&|s| s.power_nrmse),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub id: String,
    pub path: String,
    pub subject: String,
    pub condition: Condition,
    pub leg: Leg,
    pub side: Laterality,
    pub speed_mps: f64,
    pub samples: usize,
    pub has_moments: bool,
    pub event_source: EventSource,
    pub event_confidence: Option<f64>,
    pub strides: Vec<StrideAnalysis>,
    pub rejected_strides: Vec<RejectedStride>,
    pub stats: TrialStats,
    pub mean_stride_plane: Option<ReferencePlane>,
    /// Shank–foot fit on the mean stride, swing from the mean toe-off.
    pub mean_stride_fit: Option<LinearCouplingFit>,
    pub self_prediction: Option<PredictionCheck>,
    pub reference_prediction: Option<PredictionCheck>,
    pub flagged_raw_samples: usize,
    pub ignored_columns: Vec<String>,
    pub notices: Vec<String>,
    /// Requested analyses that could not run on this trial.
    pub skipped: Vec<String>,
    #[serde(skip)]
    pub mean_curves: Option<MeanCurves>,
}

fn trial_id(path: &Path, record: &TrialRecord) -> String {
    if record.id.is_empty() {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    } else {
        record.id.clone()
    }
}

pub fn mean_curves(strides: &[StrideAnalysis]) -> Option<MeanCurves> {
    if strides.is_empty() {
        return None;
    }
    let deg = |f: &dyn Fn(&StrideAnalysis) -> &Vec<f64>| -> Vec<Vec<f64>> {
        strides
            .iter()
            .map(|s| f(s).iter().map(|v| v.to_degrees()).collect())
            .collect()
    };
    let mean = |c: Vec<Vec<f64>>| {
        let refs: Vec<&[f64]> = c.iter().map(Vec::as_slice).collect();
        mean_curve(&refs)
    };
    Some(MeanCurves {
        thigh: mean(deg(&|s| &s.elevation.thigh)),
        shank: mean(deg(&|s| &s.elevation.shank)),
        foot: mean(deg(&|s| &s.elevation.foot)),
    })
}

/// Loads, segments and analyzes one trial.
pub fn analyze_trial(
    path: &Path,
    cfg: &AnalysisConfig,
    toggles: &Toggles,
    reference: Option<&ReferencePlane>,
) -> Result<TrialResult> {
    let record = load_trial(path, &cfg.load_options()).with_context(|| format!("loading {}", path.display()))?;
    analyze_record(path, &record, cfg, toggles, reference)
}

pub fn analyze_record(
    path: &Path,
    record: &TrialRecord,
    cfg: &AnalysisConfig,
    toggles: &Toggles,
    reference: Option<&ReferencePlane>,
) -> Result<TrialResult> {
    let id = trial_id(path, record);
    let side = cfg.side.unwrap_or(record.metadata.side);
    let mut notices = Vec::new();
    let mut skipped = Vec::new();

    let (events, event_source, event_confidence) = resolve_events(record).with_context(|| format!("events for {id}"))?;
    if event_source == EventSource::Detected {
        notices.push("no events in file; detected from foot elevation angle".to_string());
    }
    let seg = segment_strides(record, &events, cfg.grid).with_context(|| format!("segmenting {id}"))?;
    let want_moments = toggles.esm || toggles.power_check;
    if want_moments && !record.has_moments() {
        skipped.push("no moment columns; ESM and power check skipped".to_string());
    }
    let mut opts = cfg.analysis_options();
    opts.compute_esm = want_moments && record.has_moments();

    let mut strides = Vec::with_capacity(seg.strides.len());
    for s in &seg.strides {
        let mut a = analyze_stride(s, side, &opts).with_context(|| format!("{id} stride {}", s.index))?;
        if !toggles.power_check {
            a.power = None;
            a.power_r_squared = None;
            a.power_nrmse = None;
        }
        if !toggles.angles {
            a.angle_cvp = None;
            a.angle_scores = None;
            a.angle_max_out_of_plane_deg = None;
            a.shank_foot = None;
        }
        if !toggles.esm {
            a.esm_cvp = None;
            a.esm_scores = None;
            a.esm_max_out_of_plane = None;
        }
        strides.push(a);
    }
    if strides.is_empty() {
        anyhow::bail!("{id}: every stride was rejected");
    }

    let curves = mean_curves(&strides);
    let mean_stride_plane = match curves.as_ref().filter(|_| toggles.angles) {
        Some(c) => match ReferencePlane::fit(&id, c) {
            Ok(p) => Some(p),
            Err(e) => {
                notices.push(format!("mean-stride plane unavailable: {e:#}"));
                None
            }
        },
        None => None,
    };
    let toe_offs: Vec<usize> = strides
        .iter()
        .filter_map(|s| s.toe_off_percent)
        .map(|p| (p / 100.0 * (cfg.grid - 1) as f64).round() as usize)
        .collect();
    let mean_stride_fit = match (&curves, toe_offs.is_empty() || !toggles.angles) {
        (Some(c), false) => {
            let to = (toe_offs.iter().sum::<usize>() as f64 / toe_offs.len() as f64).round() as usize;
            SwingWindow::from_toe_off(to, cfg.grid, cfg.tolerances.swing_trim)
                .and_then(|w| shank_foot_fit(&c.shank, &c.foot, w))
                .ok()
        }
        _ => None,
    };
    let (mut self_prediction, mut reference_prediction) = (None, None);
    if toggles.prediction {
        if let (Some(c), Some(plane)) = (&curves, &mean_stride_plane) {
            match check_prediction(plane, &c.thigh, &c.foot, &c.shank) {
                Ok(p) => self_prediction = Some(p),
                Err(e) => notices.push(format!("self-consistency prediction failed: {e}")),
            }
            if let Some(r) = reference {
                match check_prediction(r, &c.thigh, &c.foot, &c.shank) {
                    Ok(p) => reference_prediction = Some(p),
                    Err(e) => notices.push(format!("reference prediction failed: {e}")),
                }
            }
        }
    }

    Ok(TrialResult {
        path: path.display().to_string(),
        subject: record.metadata.subject.clone(),
        condition: record.metadata.condition,
        leg: record.metadata.leg,
        side,
        speed_mps: record.metadata.speed_mps,
        samples: record.len(),
        has_moments: record.has_moments(),
        event_source,
        event_confidence,
        stats: TrialStats::of(&strides),
        strides,
        rejected_strides: seg.rejected,
        mean_stride_plane,
        mean_stride_fit,
        self_prediction,
        reference_prediction,
        flagged_raw_samples: record.flagged.len(),
        ignored_columns: record.ignored_columns.clone(),
        notices,
        skipped,
        mean_curves: curves,
        id,
    })
}

/// Analyzes every trial on a pool of `cfg.jobs` workers. Results keep the
/// order of `paths`.
pub fn run_batch(
    paths: &[PathBuf],
    cfg: &AnalysisConfig,
    toggles: &Toggles,
    reference: Option<&ReferencePlane>,
) -> Result<Vec<(PathBuf, Result<TrialResult>)>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;
    Ok(pool.install(|| {
        paths
            .par_iter()
            .map(|p| (p.clone(), analyze_trial(p, cfg, toggles, reference)))
            .collect()
    }))
}

/// Reference plane from a plane JSON or from the mean stride of a trial CSV.
pub fn load_reference(path: &Path, cfg: &AnalysisConfig) -> Result<ReferencePlane> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing reference plane {}", path.display()));
    }
    let toggles = Toggles {
        angles: true,
        esm: false,
        power_check: false,
        prediction: false,
    };
    let t = analyze_trial(path, cfg, &toggles, None)?;
    t.mean_stride_plane
        .with_context(|| format!("no plane could be fit to {}", path.display()))
}

/// Elevation points of a stride in degrees, for plotting.
pub fn stride_points_deg(s: &StrideAnalysis) -> Vec<[f64; 3]> {
    elevation_points_deg(&s.elevation)
}
