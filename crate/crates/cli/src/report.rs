use std::collections::BTreeMap;

use elevspace::coordination::MeanSd;
use elevspace::io::{Condition, Leg};
use serde::Serialize;

use crate::config::AnalysisConfig;
use crate::pipeline::{ReferencePlane, TrialResult};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub path: String,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub trials_total: usize,
    pub trials_analyzed: usize,
    pub trials_failed: usize,
    pub trials_with_skips: usize,
    pub strides_analyzed: usize,
    pub strides_rejected: usize,
}

/// Stride-level statistics pooled over every trial of one condition and leg.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionAggregate {
    pub condition: Condition,
    pub leg: Leg,
    pub trials: usize,
    pub strides: usize,
    pub angle_pi: Option<MeanSd>,
    pub esm_pi: Option<MeanSd>,
    pub slope: Option<MeanSd>,
    pub bias_deg: Option<MeanSd>,
    pub fit_r_squared: Option<MeanSd>,
    pub power_r_squared: Option<MeanSd>,
    pub power_nrmse: Option<MeanSd>,
}

pub fn aggregate_by_condition(trials: &[TrialResult]) -> Vec<ConditionAggregate> {
    let mut groups: BTreeMap<(Condition, Leg), Vec<&TrialResult>> = BTreeMap::new();
    for t in trials {
        groups.entry((t.condition, t.leg)).or_default().push(t);
    }
    groups
        .into_iter()
        .map(|((condition, leg), ts)| {
            let strides: Vec<_> = ts.iter().flat_map(|t| &t.strides).collect();
            let stat = |f: &dyn Fn(&elevspace::StrideAnalysis) -> Option<f64>| {
                let v: Vec<f64> = strides.iter().filter_map(|s| f(s)).filter(|v| v.is_finite()).collect();
                MeanSd::of(&v)
            };
            ConditionAggregate {
                condition,
                leg,
                trials: ts.len(),
                strides: strides.len(),
                angle_pi: stat(&|s| s.angle_cvp.map(|m| m.planarity_index)),
                esm_pi: stat(&|s| s.esm_cvp.map(|m| m.planarity_index)),
                slope: stat(&|s| s.shank_foot.map(|f| f.slope)),
                bias_deg: stat(&|s| s.shank_foot.map(|f| f.bias)),
                fit_r_squared: stat(&|s| s.shank_foot.map(|f| f.r_squared)),
                power_r_squared: stat(&|s| s.power_r_squared),
                power_nrmse: stat(&|s| s.power_nrmse),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: AnalysisConfig,
    pub summary: Summary,
    pub reference_plane: Option<ReferencePlane>,
    pub by_condition: Vec<ConditionAggregate>,
    pub trials: Vec<TrialResult>,
    pub failures: Vec<Failure>,
    pub caveats: Vec<String>,
}

impl Report {
    pub fn new(
        command: &str,
        config: &AnalysisConfig,
        trials: Vec<TrialResult>,
        failures: Vec<Failure>,
        reference_plane: Option<ReferencePlane>,
    ) -> Self {
        let summary = Summary {
            trials_total: trials.len() + failures.len(),
            trials_analyzed: trials.len(),
            trials_failed: failures.len(),
            trials_with_skips: trials.iter().filter(|t| !t.skipped.is_empty()).count(),
            strides_analyzed: trials.iter().map(|t| t.strides.len()).sum(),
            strides_rejected: trials.iter().map(|t| t.rejected_strides.len()).sum(),
        };
        let caveats = caveats(config, &trials);
        Self {
            tool: "elevspace",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.clone(),
            summary,
            reference_plane,
            by_condition: aggregate_by_condition(&trials),
            trials,
            failures,
            caveats,
        }
    }

    /// 0 when every trial was analyzed in full, 2 when some analyses were
    /// skipped, 1 when any trial failed.
    pub fn exit_code(&self) -> i32 {
        if self.summary.trials_failed > 0 {
            1
        } else if self.summary.trials_with_skips > 0 {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn caveats(config: &AnalysisConfig, trials: &[TrialResult]) -> Vec<String> {
    let mut out = vec![
        "pelvis moments are taken as zero; elevation space moments use the hip, knee and ankle torques only".to_string(),
        "angle planes are fit in degrees, moment planes in Nm/kg".to_string(),
        "elevation rates in the power check are J(q) times joint velocities differentiated before resampling"
            .to_string(),
    ];
    if config.pelvis_columns == elevspace::PelvisColumns::Excluded {
        out.push("pelvis rows of the Jacobian transpose are excluded from the moment map".to_string());
    }
    let detected: Vec<&str> = trials
        .iter()
        .filter(|t| t.event_source == elevspace::io::EventSource::Detected)
        .map(|t| t.id.as_str())
        .collect();
    if !detected.is_empty() {
        out.push(format!(
            "gait events were detected from kinematics for: {}",
            detected.join(", ")
        ));
    }
    if trials.iter().any(|t| t.strides.iter().any(|s| s.flagged_samples > 0)) {
        out.push("some grid samples were flagged (non-finite input or gimbal posture) and left out of fits".to_string());
    }
    out
}
