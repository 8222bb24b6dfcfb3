//! Deterministic synthetic walking trials with known structure, for tests,
//! demos and the `synth` command.

use std::f64::consts::TAU;

use crate::io::{Condition, GaitEvents, Leg, TrialMetadata, TrialRecord};
use crate::kinematics::{Laterality, JOINT_DOFS};

/// Smooth periodic gait generator. Angles in degrees, moments in Nm/kg.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticGait {
    pub id: String,
    pub subject: String,
    pub condition: Condition,
    pub leg: Leg,
    pub side: Laterality,
    pub strides: usize,
    pub period_s: f64,
    pub sampling_hz: f64,
    pub speed_mps: f64,
    /// Time before the first heel strike and after the last one.
    pub lead_s: f64,
    /// Scale of every non-sagittal angle and moment; 0 gives planar motion.
    pub out_of_plane: f64,
    /// All ankle angles held at zero.
    pub locked_ankle: bool,
    /// Constant pelvis tilt.
    pub pelvis_fixed: bool,
    pub toe_off_fraction: f64,
    pub moments: bool,
    /// Write heel-strike/toe-off markers into the record.
    pub events: bool,
    /// Depth of a slow amplitude modulation across strides.
    pub jitter: f64,
    pub mass_kg: Option<f64>,
}

impl SyntheticGait {
    pub fn able_bodied(id: &str) -> Self {
        Self {
            id: id.to_string(),
            subject: "S01".into(),
            condition: Condition::AbleBodied,
            leg: Leg::Right,
            side: Laterality::Right,
            strides: 5,
            period_s: 1.1,
            sampling_hz: 100.0,
            speed_mps: 1.2,
            lead_s: 0.37,
            out_of_plane: 1.0,
            locked_ankle: false,
            pelvis_fixed: false,
            toe_off_fraction: 0.6,
            moments: true,
            events: true,
            jitter: 0.0,
            mass_kg: Some(72.0),
        }
    }

    /// Sagittal-only motion with a still pelvis.
    pub fn planar(id: &str) -> Self {
        Self {
            out_of_plane: 0.0,
            pelvis_fixed: true,
            ..Self::able_bodied(id)
        }
    }

    pub fn passive(id: &str) -> Self {
        Self {
            subject: "P01".into(),
            condition: Condition::PassiveProsthesis,
            leg: Leg::Amputated,
            locked_ankle: true,
            ..Self::able_bodied(id)
        }
    }

    pub fn powered(id: &str) -> Self {
        Self {
            subject: "P01".into(),
            condition: Condition::PoweredProsthesis,
            leg: Leg::Amputated,
            ..Self::able_bodied(id)
        }
    }

    fn phase(&self, t: f64) -> (f64, f64) {
        let phi = TAU * (t - self.lead_s) / self.period_s;
        let gain = 1.0 + self.jitter * (TAU * t / (3.7 * self.period_s)).sin();
        (phi, gain)
    }

    /// Joint angles in degrees at time `t`.
    pub fn angles_at(&self, t: f64) -> [f64; JOINT_DOFS] {
        let (phi, g) = self.phase(t);
        let (s, c) = phi.sin_cos();
        let c2 = (2.0 * phi).cos();
        let o = self.out_of_plane;
        let tilt = if self.pelvis_fixed { 8.0 } else { 8.0 - 2.0 * g * c2 };
        let mut q = [
            tilt,
            o * 4.0 * s,
            o * 5.0 * c,
            12.0 + g * (20.0 * c + 4.0 * s),
            o * 3.0 * s,
            o * (4.0 * c + 2.0),
            30.0 - g * (25.0 * c - 4.0 * s),
            o * 2.0 * s,
            o * 5.0 * s,
            -3.0 + g * 6.0 * c2,
            o * 3.0 * c,
            o * 4.0 * s,
        ];
        if self.locked_ankle {
            q[9..].fill(0.0);
        }
        q
    }

    /// Hip, knee, ankle moments (Nm/kg) at time `t`.
    pub fn moments_at(&self, t: f64) -> [f64; 9] {
        let (phi, g) = self.phase(t);
        let (s, c) = phi.sin_cos();
        let (s2, c2) = (2.0 * phi).sin_cos();
        let o = self.out_of_plane;
        let ankle = if self.locked_ankle { 0.0 } else { 1.0 };
        [
            g * (0.6 * c + 0.2 * s2),
            o * 0.5 * s,
            o * 0.1 * c,
            g * (-0.4 * s + 0.15 * c2),
            o * 0.2 * c,
            o * 0.05 * s,
            ankle * g * (0.7 - 0.8 * c + 0.3 * s),
            ankle * o * 0.1 * s2,
            ankle * o * 0.05 * c,
        ]
    }

    pub fn heel_strike_times(&self) -> Vec<f64> {
        (0..=self.strides)
            .map(|i| self.lead_s + i as f64 * self.period_s)
            .collect()
    }

    pub fn record(&self) -> TrialRecord {
        let duration = 2.0 * self.lead_s + self.strides as f64 * self.period_s;
        let n = (duration * self.sampling_hz).floor() as usize + 1;
        let time: Vec<f64> = (0..n).map(|k| k as f64 / self.sampling_hz).collect();
        let nearest = |t: f64| (t * self.sampling_hz).round() as usize;
        let events = self.events.then(|| GaitEvents {
            heel_strikes: self.heel_strike_times().into_iter().map(nearest).collect(),
            toe_offs: (0..self.strides)
                .map(|i| nearest(self.lead_s + (i as f64 + self.toe_off_fraction) * self.period_s))
                .collect(),
        });
        TrialRecord {
            id: self.id.clone(),
            metadata: TrialMetadata {
                subject: self.subject.clone(),
                side: self.side,
                condition: self.condition,
                leg: self.leg,
                speed_mps: self.speed_mps,
                mass_kg: self.mass_kg,
                sampling_hz: self.sampling_hz,
            },
            angles_deg: time.iter().map(|&t| self.angles_at(t)).collect(),
            moments: self.moments.then(|| time.iter().map(|&t| self.moments_at(t)).collect()),
            time,
            events,
            flagged: vec![],
            ignored_columns: vec![],
        }
    }
}

/// A small mixed-condition dataset: two able-bodied legs, plus passive and
/// powered prosthesis trials of the same amputee.
pub fn synthetic_suite() -> Vec<SyntheticGait> {
    let mut left = SyntheticGait::able_bodied("ab_s01_left");
    left.side = Laterality::Left;
    left.leg = Leg::Left;
    left.jitter = 0.05;
    let mut right = SyntheticGait::able_bodied("ab_s01_right");
    right.jitter = 0.05;
    let mut ab2 = SyntheticGait::able_bodied("ab_s02_right");
    ab2.subject = "S02".into();
    ab2.period_s = 1.05;
    ab2.speed_mps = 1.3;
    ab2.out_of_plane = 1.3;
    let mut passive = SyntheticGait::passive("tf_p01_passive");
    passive.period_s = 1.25;
    passive.speed_mps = 0.9;
    let mut powered = SyntheticGait::powered("tf_p01_powered");
    powered.period_s = 1.2;
    powered.speed_mps = 1.0;
    vec![left, right, ab2, passive, powered]
}
