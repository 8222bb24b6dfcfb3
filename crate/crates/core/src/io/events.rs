use serde::{Deserialize, Serialize};

use super::trial::TrialRecord;
use crate::error::{Error, Result};
use crate::kinematics::{compose_segment_frames, elevation_tracks};

/// Heel-strike and toe-off sample indices for one leg.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitEvents {
    pub heel_strikes: Vec<usize>,
    pub toe_offs: Vec<usize>,
}

impl GaitEvents {
    /// Both lists strictly increasing and no two toe-offs without a heel
    /// strike between them. A missing toe-off is allowed.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("heel strikes", &self.heel_strikes), ("toe-offs", &self.toe_offs)] {
            if v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidEvents(format!("{name} are not strictly increasing")));
            }
        }
        if let Some(dup) = self.toe_offs.iter().find(|t| self.heel_strikes.contains(t)) {
            return Err(Error::InvalidEvents(format!("sample {dup} is both heel strike and toe-off")));
        }
        for w in self.toe_offs.windows(2) {
            if !self.heel_strikes.iter().any(|&h| h > w[0] && h < w[1]) {
                return Err(Error::InvalidEvents(format!(
                    "toe-offs at {} and {} have no heel strike between them",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// First toe-off strictly inside `(start, end)`.
    pub fn toe_off_between(&self, start: usize, end: usize) -> Option<usize> {
        self.toe_offs.iter().copied().find(|&t| t > start && t < end)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    File,
    Detected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedEvents {
    pub events: GaitEvents,
    /// Autocorrelation of the foot elevation angle at the detected period.
    pub confidence: f64,
    pub period_samples: usize,
}

const MIN_CONFIDENCE: f64 = 0.5;

/// Estimates heel strikes (maxima of the foot elevation angle) and toe-offs
/// (minima between them). Only used when the trial carries no events.
pub fn detect_events_from_kinematics(trial: &TrialRecord) -> Result<DetectedEvents> {
    let side = trial.metadata.side;
    let frames: Vec<_> = trial
        .angles()
        .iter()
        .map(|a| compose_segment_frames(a, side).ok())
        .collect();
    let valid: Vec<_> = frames.iter().flatten().copied().collect();
    if valid.len() < 8 {
        return Err(Error::NoPeriodicity(0.0));
    }
    let ([_, _, _, foot_valid], _) = elevation_tracks(&valid);
    // re-expand onto the sample grid, filling gaps with the mean
    let finite: Vec<f64> = foot_valid.iter().copied().filter(|v| v.is_finite()).collect();
    let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    let mut it = foot_valid.into_iter();
    let foot: Vec<f64> = frames
        .iter()
        .map(|f| match f {
            Some(_) => it.next().filter(|v| v.is_finite()).unwrap_or(mean),
            None => mean,
        })
        .collect();

    let (period, confidence) = dominant_period(&foot)?;
    let heel_strikes = extrema(&foot, period, |a, b| a > b);
    let minima = extrema(&foot, period, |a, b| a < b);
    let mut toe_offs = Vec::new();
    for &m in &minima {
        // keep one toe-off per heel-strike interval
        let prev_hs = heel_strikes.iter().rev().find(|&&h| h < m);
        let last_to = toe_offs.last().copied();
        let ok = match (prev_hs, last_to) {
            (_, None) => true,
            (Some(&h), Some(t)) => h > t,
            (None, Some(_)) => false,
        };
        if ok {
            toe_offs.push(m);
        }
    }
    let events = GaitEvents {
        heel_strikes,
        toe_offs,
    };
    events.validate()?;
    Ok(DetectedEvents {
        events,
        confidence,
        period_samples: period,
    })
}

/// Period (samples) of the strongest autocorrelation peak after the first
/// zero crossing, and the normalized autocorrelation there.
fn dominant_period(x: &[f64]) -> Result<(usize, f64)> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var.is_nan() || var <= 1e-12 {
        return Err(Error::NoPeriodicity(0.0));
    }
    let r = |lag: usize| -> f64 {
        let s: f64 = (0..n - lag).map(|k| c[k] * c[k + lag]).sum();
        s / (n - lag) as f64 / var
    };
    let max_lag = n / 2;
    let Some(zero) = (1..=max_lag).find(|&l| r(l) < 0.0) else {
        return Err(Error::NoPeriodicity(0.0));
    };
    let rs: Vec<f64> = (0..=max_lag).map(r).collect();
    let peak = rs[zero..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // the first local maximum close to the global one, so that multiples of
    // the period are not preferred
    let lag = (zero..max_lag)
        .find(|&l| rs[l] >= 0.9 * peak && rs[l] >= rs[l - 1] && rs[l] >= rs[l + 1])
        .unwrap_or(max_lag);
    let best = rs[lag];
    if lag < 2 || best < MIN_CONFIDENCE {
        return Err(Error::NoPeriodicity(best.max(0.0)));
    }
    Ok((lag, best.min(1.0)))
}

/// Interior samples that beat every other sample within half a period.
fn extrema(x: &[f64], period: usize, better: impl Fn(f64, f64) -> bool) -> Vec<usize> {
    let half = (period / 2).max(1);
    let n = x.len();
    (1..n - 1)
        .filter(|&k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            // the peak must be bracketed: a full half-window on both sides
            // or a strictly rising/falling neighbour at the boundary
            (lo..=hi).all(|j| j == k || better(x[k], x[j]) || (x[k] == x[j] && j > k))
                && better(x[k], x[k - 1])
                && !better(x[k + 1], x[k])
        })
        .collect()
}

/// Events from the file when present; otherwise detected from kinematics.
pub fn resolve_events(trial: &TrialRecord) -> Result<(GaitEvents, EventSource, Option<f64>)> {
    if let Some(ev) = &trial.events {
        return Ok((ev.clone(), EventSource::File, None));
    }
    let d = detect_events_from_kinematics(trial)?;
    Ok((d.events, EventSource::Detected, Some(d.confidence)))
}
