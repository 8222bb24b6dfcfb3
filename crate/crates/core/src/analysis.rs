//! Per-stride pipeline: elevation angles and rates on the gait-cycle grid,
//! elevation space moments, covariation planes, shank–foot fit and power
//! comparison.

use serde::{Deserialize, Serialize};

use crate::coordination::{fit_cvp, pc_scores, shank_foot_fit, CvpModel, LinearCouplingFit, PcScores, SwingWindow};
use crate::error::Result;
use crate::io::StrideSeries;
use crate::jacobian::{elevation_space_moments, jacobian_at, power_check, smooth_series, EsmOptions, EsmSeries, PowerReport};
use crate::kinematics::{compose_segment_frames, elevation_tracks, ElevationSeries, Laterality, SegmentFrames};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub esm: EsmOptions,
    pub compute_esm: bool,
    /// Fraction trimmed from each end of the swing window.
    pub swing_trim: f64,
    /// Centered moving-average window applied to ESM; 0 or 1 disables.
    pub esm_smoothing: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            esm: EsmOptions::default(),
            compute_esm: true,
            swing_trim: 0.0,
            esm_smoothing: 0,
        }
    }
}

/// Elevation angles (radians) on the stride grid with rates `α̇ = J_α(q) q̇`.
pub fn stride_elevation(stride: &StrideSeries, side: Laterality) -> Result<ElevationSeries> {
    let n = stride.grid_len();
    let mut frames = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    let nan_frames = SegmentFrames {
        pelvis: nalgebra::Matrix3::from_element(f64::NAN),
        thigh: nalgebra::Matrix3::from_element(f64::NAN),
        shank: nalgebra::Matrix3::from_element(f64::NAN),
        foot: nalgebra::Matrix3::from_element(f64::NAN),
    };
    for (q, qdot) in stride.angles.iter().zip(&stride.velocities) {
        if q.is_finite() && qdot.iter().all(|v| v.is_finite()) {
            frames.push(compose_segment_frames(q, side)?);
            rates.push(jacobian_at(q, side)?.limb_rates(qdot));
        } else {
            frames.push(nan_frames);
            rates.push([f64::NAN; 3]);
        }
    }
    let ([pelvis, thigh, shank, foot], mut flagged) = elevation_tracks(&frames);
    flagged.extend(&stride.flagged);
    flagged.sort_unstable();
    flagged.dedup();
    Ok(ElevationSeries {
        pelvis,
        thigh,
        shank,
        foot,
        thigh_rate: rates.iter().map(|r| r[0]).collect(),
        shank_rate: rates.iter().map(|r| r[1]).collect(),
        foot_rate: rates.iter().map(|r| r[2]).collect(),
        flagged,
    })
}

/// Points `(α_t, α_s, α_f)` in degrees.
pub fn elevation_points_deg(e: &ElevationSeries) -> Vec<[f64; 3]> {
    e.limb_points().into_iter().map(|p| p.map(f64::to_degrees)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrideAnalysis {
    pub index: usize,
    pub duration_s: f64,
    pub toe_off_percent: Option<f64>,
    #[serde(skip)]
    pub elevation: ElevationSeries,
    pub angle_cvp: Option<CvpModel>,
    #[serde(skip)]
    pub angle_scores: Option<PcScores>,
    pub angle_max_out_of_plane_deg: Option<f64>,
    pub shank_foot: Option<LinearCouplingFit>,
    #[serde(skip)]
    pub esm: Option<EsmSeries>,
    pub esm_cvp: Option<CvpModel>,
    #[serde(skip)]
    pub esm_scores: Option<PcScores>,
    pub esm_max_out_of_plane: Option<f64>,
    #[serde(skip)]
    pub power: Option<PowerReport>,
    pub power_r_squared: Option<f64>,
    pub power_nrmse: Option<f64>,
    pub flagged_samples: usize,
    pub esm_flagged_samples: usize,
    pub notices: Vec<String>,
}

pub fn analyze_stride(stride: &StrideSeries, side: Laterality, opts: &AnalysisOptions) -> Result<StrideAnalysis> {
    let elevation = stride_elevation(stride, side)?;
    let mut notices = Vec::new();
    let points = elevation_points_deg(&elevation);

    let (angle_cvp, angle_scores) = match fit_cvp(&points) {
        Ok(m) => {
            let s = pc_scores(&points, &m)?;
            (Some(m), Some(s))
        }
        Err(e) => {
            notices.push(format!("elevation PCA skipped: {e}"));
            (None, None)
        }
    };

    let shank_deg: Vec<f64> = elevation.shank.iter().map(|v| v.to_degrees()).collect();
    let foot_deg: Vec<f64> = elevation.foot.iter().map(|v| v.to_degrees()).collect();
    let shank_foot = match stride.toe_off {
        None => {
            notices.push("no toe-off event; swing analyses disabled".into());
            None
        }
        Some(to) => match SwingWindow::from_toe_off(to, stride.grid_len(), opts.swing_trim)
            .and_then(|w| shank_foot_fit(&shank_deg, &foot_deg, w))
        {
            Ok(f) => Some(f),
            Err(e) => {
                notices.push(format!("shank-foot fit skipped: {e}"));
                None
            }
        },
    };

    let mut esm = None;
    let mut esm_cvp = None;
    let mut esm_scores = None;
    let mut power = None;
    if opts.compute_esm {
        if let Some(moments) = &stride.moments {
            let mut series = elevation_space_moments(&stride.angles, moments, side, &opts.esm)?;
            if opts.esm_smoothing > 1 {
                series.thigh = smooth_series(&series.thigh, opts.esm_smoothing);
                series.shank = smooth_series(&series.shank, opts.esm_smoothing);
                series.foot = smooth_series(&series.foot, opts.esm_smoothing);
            }
            let pts = series.points();
            match fit_cvp(&pts) {
                Ok(m) => {
                    esm_scores = Some(pc_scores(&pts, &m)?);
                    esm_cvp = Some(m);
                }
                Err(e) => notices.push(format!("ESM PCA skipped: {e}")),
            }
            power = Some(power_check(&stride.velocities, moments, &series, &elevation.limb_rates())?);
            esm = Some(series);
        }
    }
    Ok(StrideAnalysis {
        index: stride.index,
        duration_s: stride.duration_s,
        toe_off_percent: stride.toe_off_percent(),
        angle_max_out_of_plane_deg: angle_scores.as_ref().map(|s| s.max_out_of_plane),
        esm_max_out_of_plane: esm_scores.as_ref().map(|s| s.max_out_of_plane),
        power_r_squared: power.as_ref().and_then(|p| p.r_squared),
        power_nrmse: power.as_ref().and_then(|p| p.nrmse),
        flagged_samples: elevation.flagged.len(),
        esm_flagged_samples: esm.as_ref().map_or(0, |e| e.flagged.len()),
        elevation,
        angle_cvp,
        angle_scores,
        shank_foot,
        esm,
        esm_cvp,
        esm_scores,
        power,
        notices,
    })
}

/// Sample-wise mean across equally long curves, ignoring NaN entries.
pub fn mean_curve(curves: &[&[f64]]) -> Vec<f64> {
    let n = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    (0..n)
        .map(|k| {
            let (s, c) = curves
                .iter()
                .map(|v| v[k])
                .filter(|v| v.is_finite())
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if c == 0 {
                f64::NAN
            } else {
                s / c as f64
            }
        })
        .collect()
}
