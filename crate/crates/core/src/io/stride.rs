use serde::{Deserialize, Serialize};

use super::events::GaitEvents;
use super::trial::TrialRecord;
use crate::error::{Error, Result};
use crate::jacobian::JointMoments;
use crate::kinematics::{AnatomicalAngles, JOINT_DOFS};

/// Points on the normalized gait cycle, 0–100% inclusive.
pub const DEFAULT_GRID: usize = 101;

/// Strides spanning fewer raw samples are rejected.
pub const MIN_STRIDE_SAMPLES: usize = 10;

/// One heel-strike to heel-strike interval resampled onto the gait-cycle grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StrideSeries {
    pub index: usize,
    pub start_sample: usize,
    pub end_sample: usize,
    pub start_time: f64,
    pub duration_s: f64,
    pub speed_mps: f64,
    /// Radians.
    pub angles: Vec<AnatomicalAngles>,
    /// rad/s, differentiated on the raw time axis before resampling.
    pub velocities: Vec<[f64; JOINT_DOFS]>,
    /// Nm/kg.
    pub moments: Option<Vec<JointMoments>>,
    /// Grid index of toe-off; `None` disables swing analyses.
    pub toe_off: Option<usize>,
    /// Grid samples touched by a non-finite raw sample.
    pub flagged: Vec<usize>,
}

impl StrideSeries {
    pub fn grid_len(&self) -> usize {
        self.angles.len()
    }

    /// Time between grid points in seconds.
    pub fn grid_dt(&self) -> f64 {
        self.duration_s / (self.grid_len() - 1) as f64
    }

    pub fn toe_off_percent(&self) -> Option<f64> {
        self.toe_off.map(|t| 100.0 * t as f64 / (self.grid_len() - 1) as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedStride {
    pub index: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Segmentation {
    pub strides: Vec<StrideSeries>,
    pub rejected: Vec<RejectedStride>,
}

/// Linear interpolation of `(time, values)` at `t`. Exact at sample times.
pub fn resample_linear(time: &[f64], values: &[f64], t: f64) -> f64 {
    let k = time.partition_point(|&x| x <= t);
    if k == 0 {
        return values[0];
    }
    let i = k - 1;
    if time[i] == t || i + 1 == time.len() {
        return values[i];
    }
    let w = (t - time[i]) / (time[i + 1] - time[i]);
    values[i] + w * (values[i + 1] - values[i])
}

/// Central differences on a (possibly non-uniform) time axis, one-sided at
/// the ends.
fn differentiate(time: &[f64], values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|k| {
            let (lo, hi) = if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            (values[hi] - values[lo]) / (time[hi] - time[lo])
        })
        .collect()
}

/// Splits a trial into strides between consecutive heel strikes and
/// resamples each onto a `grid`-point gait cycle.
pub fn segment_strides(trial: &TrialRecord, events: &GaitEvents, grid: usize) -> Result<Segmentation> {
    events.validate()?;
    if grid < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            actual: grid,
        });
    }
    let n = trial.len();
    let hs: Vec<usize> = events.heel_strikes.iter().copied().filter(|&h| h < n).collect();
    if hs.len() < 2 {
        return Err(Error::NoCompleteStride);
    }
    let time = &trial.time;

    // channels in radians, plus velocities over the full trial
    let angle_ch: Vec<Vec<f64>> = (0..JOINT_DOFS)
        .map(|j| trial.angles_deg.iter().map(|q| q[j].to_radians()).collect())
        .collect();
    let vel_ch: Vec<Vec<f64>> = angle_ch.iter().map(|c| differentiate(time, c)).collect();
    let moment_ch: Option<Vec<Vec<f64>>> = trial
        .moments
        .as_ref()
        .map(|m| (0..9).map(|j| m.iter().map(|r| r[j]).collect()).collect());

    let mut out = Segmentation::default();
    for (index, w) in hs.windows(2).enumerate() {
        let (start, end) = (w[0], w[1]);
        if end + 1 - start < MIN_STRIDE_SAMPLES {
            out.rejected.push(RejectedStride {
                index,
                reason: format!(
                    "stride spans {} raw samples, need at least {MIN_STRIDE_SAMPLES}",
                    end + 1 - start
                ),
            });
            continue;
        }
        let (t0, t1) = (time[start], time[end]);
        let grid_times: Vec<f64> = (0..grid)
            .map(|g| {
                if g == grid - 1 {
                    t1
                } else {
                    t0 + (t1 - t0) * g as f64 / (grid - 1) as f64
                }
            })
            .collect();
        let sample = |ch: &[f64]| -> Vec<f64> {
            grid_times
                .iter()
                .map(|&t| resample_linear(&time[start..=end], &ch[start..=end], t))
                .collect()
        };
        let a: Vec<Vec<f64>> = angle_ch.iter().map(|c| sample(c)).collect();
        let v: Vec<Vec<f64>> = vel_ch.iter().map(|c| sample(c)).collect();
        let m: Option<Vec<Vec<f64>>> = moment_ch.as_ref().map(|mc| mc.iter().map(|c| sample(c)).collect());

        let angles: Vec<AnatomicalAngles> = (0..grid)
            .map(|g| AnatomicalAngles::from_q(std::array::from_fn(|j| a[j][g])))
            .collect();
        let velocities: Vec<[f64; JOINT_DOFS]> = (0..grid).map(|g| std::array::from_fn(|j| v[j][g])).collect();
        let moments: Option<Vec<JointMoments>> = m.map(|m| {
            (0..grid)
                .map(|g| JointMoments::from_joints(std::array::from_fn(|j| m[j][g])))
                .collect()
        });
        let flagged: Vec<usize> = (0..grid)
            .filter(|&g| {
                !angles[g].is_finite()
                    || velocities[g].iter().any(|x| !x.is_finite())
                    || moments.as_ref().is_some_and(|m| !m[g].is_finite())
            })
            .collect();
        let toe_off = events.toe_off_between(start, end).map(|to| {
            let frac = (time[to] - t0) / (t1 - t0);
            (frac * (grid - 1) as f64).round() as usize
        });
        out.strides.push(StrideSeries {
            index,
            start_sample: start,
            end_sample: end,
            start_time: t0,
            duration_s: t1 - t0,
            speed_mps: trial.metadata.speed_mps,
            angles,
            velocities,
            moments,
            toe_off,
            flagged,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::trial::{Condition, Leg, TrialMetadata};
    use crate::kinematics::Laterality;

    fn trial(n: usize, hz: f64, f: impl Fn(f64) -> f64) -> TrialRecord {
        let time: Vec<f64> = (0..n).map(|k| k as f64 / hz).collect();
        TrialRecord {
            id: "t".into(),
            metadata: TrialMetadata {
                subject: "s".into(),
                side: Laterality::Right,
                condition: Condition::AbleBodied,
                leg: Leg::Right,
                speed_mps: 1.2,
                mass_kg: None,
                sampling_hz: hz,
            },
            angles_deg: time.iter().map(|&t| [f(t); 12]).collect(),
            time,
            moments: None,
            events: None,
            flagged: vec![],
            ignored_columns: vec![],
        }
    }

    #[test]
    fn one_second_stride() {
        let t = trial(150, 100.0, |t| 10.0 * t);
        let ev = GaitEvents {
            heel_strikes: vec![10, 110],
            toe_offs: vec![70],
        };
        let s = segment_strides(&t, &ev, DEFAULT_GRID).unwrap();
        assert_eq!(s.strides.len(), 1);
        let st = &s.strides[0];
        assert_eq!(st.grid_len(), 101);
        assert!((st.duration_s - 1.0).abs() < 1e-12);
        assert_eq!(st.speed_mps, 1.2);
        assert_eq!(st.toe_off, Some(60));
        // endpoints are the raw samples
        assert_eq!(st.angles[0].hip.flexion, t.angles_deg[10][3].to_radians());
        assert_eq!(st.angles[100].hip.flexion, t.angles_deg[110][3].to_radians());
        // linear signal: velocity 10 deg/s everywhere
        for v in &st.velocities {
            assert!((v[0] - 10f64.to_radians()).abs() < 1e-9);
        }
    }

    #[test]
    fn periodic_strides_coincide() {
        let period = 1.1;
        let w = 2.0 * std::f64::consts::PI / period;
        let f = move |t: f64| 20.0 * (w * t).sin() + 5.0 * (2.0 * w * t).cos();
        let t = trial(600, 100.0, f);
        let ev = GaitEvents {
            heel_strikes: vec![20, 130, 240, 350, 460],
            toe_offs: vec![],
        };
        let s = segment_strides(&t, &ev, DEFAULT_GRID).unwrap();
        assert_eq!(s.strides.len(), 4);
        for w in s.strides.windows(2) {
            for g in 0..101 {
                assert!((w[0].angles[g].knee.flexion - w[1].angles[g].knee.flexion).abs() < 1e-9);
            }
            assert!(w[0].toe_off.is_none());
        }
    }

    #[test]
    fn short_strides_rejected() {
        let t = trial(100, 100.0, |t| t);
        let ev = GaitEvents {
            heel_strikes: vec![0, 5, 50],
            toe_offs: vec![],
        };
        let s = segment_strides(&t, &ev, DEFAULT_GRID).unwrap();
        assert_eq!(s.strides.len(), 1);
        assert_eq!(s.rejected.len(), 1);
        assert_eq!(s.rejected[0].index, 0);
        assert_eq!(s.strides[0].index, 1);
        let none = GaitEvents {
            heel_strikes: vec![3],
            toe_offs: vec![],
        };
        assert!(matches!(segment_strides(&t, &none, DEFAULT_GRID), Err(Error::NoCompleteStride)));
    }

    #[test]
    fn flagged_raw_sample_propagates() {
        let mut t = trial(100, 100.0, |t| t);
        t.angles_deg[30][5] = f64::NAN;
        let ev = GaitEvents {
            heel_strikes: vec![0, 80],
            toe_offs: vec![],
        };
        let s = segment_strides(&t, &ev, DEFAULT_GRID).unwrap();
        assert!(!s.strides[0].flagged.is_empty());
        assert!(s.strides[0].flagged.iter().all(|&g| (33..=40).contains(&g)));
    }

    #[test]
    fn resample_exact_at_nodes() {
        let time = [0.0, 0.1, 0.25, 0.4];
        let vals = [1.0, f64::NAN, 3.0, 4.0];
        assert_eq!(resample_linear(&time, &vals, 0.25), 3.0);
        assert_eq!(resample_linear(&time, &vals, 0.4), 4.0);
        assert!((resample_linear(&time, &vals, 0.325) - 3.5).abs() < 1e-12);
        assert!(resample_linear(&time, &vals, 0.05).is_nan());
    }
}
