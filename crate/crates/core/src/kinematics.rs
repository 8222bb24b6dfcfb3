//! Segment orientation frames from anatomical joint angles, sagittal
//! elevation angles and segment angular velocities.
//!
//! Frames are composed intrinsically in tilt/flexion, obliquity/adduction,
//! rotation order for every joint except the ankle, whose second and third
//! factors are rotation then inversion. Laterality only changes the signs of
//! the frontal and transverse factors (and the pelvis obliquity).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of anatomical degrees of freedom in the joint-angle vector.
pub const JOINT_DOFS: usize = 12;

/// Indices into the joint-angle vector `q`.
pub mod dof {
    pub const PELVIS_TILT: usize = 0;
    pub const PELVIS_OBLIQUITY: usize = 1;
    pub const PELVIS_ROTATION: usize = 2;
    pub const HIP_FLEXION: usize = 3;
    pub const HIP_ADDUCTION: usize = 4;
    pub const HIP_ROTATION: usize = 5;
    pub const KNEE_FLEXION: usize = 6;
    pub const KNEE_ADDUCTION: usize = 7;
    pub const KNEE_ROTATION: usize = 8;
    pub const ANKLE_DORSIFLEXION: usize = 9;
    pub const ANKLE_INVERSION: usize = 10;
    pub const ANKLE_ROTATION: usize = 11;

    /// The four sagittal (flexion) degrees of freedom.
    pub const SAGITTAL: [usize; 4] = [PELVIS_TILT, HIP_FLEXION, KNEE_FLEXION, ANKLE_DORSIFLEXION];

    pub const NAMES: [&str; 12] = [
        "pelvis_tilt",
        "pelvis_obliquity",
        "pelvis_rotation",
        "hip_flexion",
        "hip_adduction",
        "hip_rotation",
        "knee_flexion",
        "knee_adduction",
        "knee_rotation",
        "ankle_dorsiflexion",
        "ankle_inversion",
        "ankle_rotation",
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Laterality {
    Left,
    Right,
}

impl Laterality {
    /// +1 for the right side, -1 for the left.
    fn right_positive(self) -> f64 {
        match self {
            Laterality::Left => -1.0,
            Laterality::Right => 1.0,
        }
    }
}

impl fmt::Display for Laterality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Laterality::Left => "left",
            Laterality::Right => "right",
        })
    }
}

impl FromStr for Laterality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Laterality::Left),
            "right" | "r" => Ok(Laterality::Right),
            other => Err(format!("unknown side '{other}' (expected left or right)")),
        }
    }
}

/// Flexion, adduction and rotation of one joint, in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    pub flexion: f64,
    pub adduction: f64,
    pub rotation: f64,
}

impl JointAngles {
    pub fn new(flexion: f64, adduction: f64, rotation: f64) -> Self {
        Self {
            flexion,
            adduction,
            rotation,
        }
    }

    pub fn sagittal(flexion: f64) -> Self {
        Self::new(flexion, 0.0, 0.0)
    }
}

/// Pelvis, hip, knee and ankle angles in radians.
///
/// For the ankle, `adduction` holds inversion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnatomicalAngles {
    pub pelvis: JointAngles,
    pub hip: JointAngles,
    pub knee: JointAngles,
    pub ankle: JointAngles,
}

impl AnatomicalAngles {
    /// Builds from `q = [φp, δp, ρp, φh, δh, ρh, φk, δk, ρk, φa, δa, ρa]` in radians.
    pub fn from_q(q: [f64; JOINT_DOFS]) -> Self {
        Self {
            pelvis: JointAngles::new(q[0], q[1], q[2]),
            hip: JointAngles::new(q[3], q[4], q[5]),
            knee: JointAngles::new(q[6], q[7], q[8]),
            ankle: JointAngles::new(q[9], q[10], q[11]),
        }
    }

    pub fn from_degrees(q_deg: [f64; JOINT_DOFS]) -> Self {
        Self::from_q(q_deg.map(f64::to_radians))
    }

    /// Sagittal-only posture from the four flexion angles (radians).
    pub fn sagittal(pelvis_tilt: f64, hip: f64, knee: f64, ankle: f64) -> Self {
        Self {
            pelvis: JointAngles::sagittal(pelvis_tilt),
            hip: JointAngles::sagittal(hip),
            knee: JointAngles::sagittal(knee),
            ankle: JointAngles::sagittal(ankle),
        }
    }

    pub fn to_q(&self) -> [f64; JOINT_DOFS] {
        let j = [self.pelvis, self.hip, self.knee, self.ankle];
        let mut q = [0.0; JOINT_DOFS];
        for (i, a) in j.iter().enumerate() {
            q[3 * i] = a.flexion;
            q[3 * i + 1] = a.adduction;
            q[3 * i + 2] = a.rotation;
        }
        q
    }

    pub fn to_degrees(&self) -> [f64; JOINT_DOFS] {
        self.to_q().map(f64::to_degrees)
    }

    pub fn is_finite(&self) -> bool {
        self.to_q().iter().all(|v| v.is_finite())
    }

    /// True when every frontal and transverse component is exactly zero.
    pub fn is_sagittal(&self) -> bool {
        let q = self.to_q();
        (0..JOINT_DOFS)
            .filter(|i| !dof::SAGITTAL.contains(i))
            .all(|i| q[i] == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub(crate) fn rotation(self, angle: f64) -> Matrix3<f64> {
        let (s, c) = angle.sin_cos();
        match self {
            Axis::X => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            Axis::Y => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            Axis::Z => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        }
    }

    /// Skew matrix `G` with `d/dθ R(θ) = G R(θ)`.
    fn generator(self) -> Matrix3<f64> {
        match self {
            Axis::X => Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
            Axis::Y => Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0),
            Axis::Z => Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        }
    }
}

/// One elementary rotation of the kinematic chain: `R_axis(sign·q[dof] + offset)`.
#[derive(Clone, Copy, Debug)]
struct Factor {
    axis: Axis,
    dof: usize,
    sign: f64,
    offset: f64,
}

/// The twelve factors of the pelvis→foot chain in multiplication order,
/// with laterality sign corrections applied.
fn chain_factors(side: Laterality) -> [Factor; JOINT_DOFS] {
    let r = side.right_positive();
    let f = |axis, dof, sign, offset| Factor {
        axis,
        dof,
        sign,
        offset,
    };
    [
        f(Axis::Z, dof::PELVIS_TILT, -1.0, 0.0),
        f(Axis::X, dof::PELVIS_OBLIQUITY, -r, 0.0),
        f(Axis::Y, dof::PELVIS_ROTATION, 1.0, 0.0),
        f(Axis::Z, dof::HIP_FLEXION, 1.0, 0.0),
        f(Axis::X, dof::HIP_ADDUCTION, r, 0.0),
        f(Axis::Y, dof::HIP_ROTATION, r, 0.0),
        f(Axis::Z, dof::KNEE_FLEXION, -1.0, 0.0),
        f(Axis::X, dof::KNEE_ADDUCTION, r, 0.0),
        f(Axis::Y, dof::KNEE_ROTATION, r, 0.0),
        f(Axis::Z, dof::ANKLE_DORSIFLEXION, 1.0, FRAC_PI_2),
        // ankle: rotation about x before inversion about y
        f(Axis::X, dof::ANKLE_ROTATION, r, 0.0),
        f(Axis::Y, dof::ANKLE_INVERSION, -r, 0.0),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Pelvis,
    Thigh,
    Shank,
    Foot,
}

impl Segment {
    pub const ALL: [Segment; 4] = [Segment::Pelvis, Segment::Thigh, Segment::Shank, Segment::Foot];
    /// Segments spanned by the reduced elevation space.
    pub const LIMB: [Segment; 3] = [Segment::Thigh, Segment::Shank, Segment::Foot];

    /// Number of chain factors that define this segment's frame.
    pub(crate) fn chain_len(self) -> usize {
        match self {
            Segment::Pelvis => 3,
            Segment::Thigh => 6,
            Segment::Shank => 9,
            Segment::Foot => 12,
        }
    }
}

/// Rotation chain evaluated at one posture, holding each factor and its
/// derivative with respect to its own joint angle.
pub(crate) struct RotationChain {
    factors: [Matrix3<f64>; JOINT_DOFS],
    derivatives: [Matrix3<f64>; JOINT_DOFS],
    dofs: [usize; JOINT_DOFS],
    /// `prefix[k]` is the product of the first `k` factors.
    prefix: [Matrix3<f64>; JOINT_DOFS + 1],
}

impl RotationChain {
    pub(crate) fn new(angles: &AnatomicalAngles, side: Laterality) -> Self {
        let q = angles.to_q();
        let chain = chain_factors(side);
        let mut factors = [Matrix3::identity(); JOINT_DOFS];
        let mut derivatives = [Matrix3::zeros(); JOINT_DOFS];
        let mut dofs = [0; JOINT_DOFS];
        let mut prefix = [Matrix3::identity(); JOINT_DOFS + 1];
        for (k, f) in chain.iter().enumerate() {
            let r = f.axis.rotation(f.sign * q[f.dof] + f.offset);
            factors[k] = r;
            derivatives[k] = f.axis.generator() * r * f.sign;
            dofs[k] = f.dof;
            prefix[k + 1] = prefix[k] * r;
        }
        Self {
            factors,
            derivatives,
            dofs,
            prefix,
        }
    }

    pub(crate) fn frame(&self, segment: Segment) -> Matrix3<f64> {
        self.prefix[segment.chain_len()]
    }

    /// `∂R_segment/∂q[dof]`, the chain product with the factor driven by
    /// `dof` replaced by its derivative.
    pub(crate) fn partial(&self, segment: Segment, dof: usize) -> Matrix3<f64> {
        let n = segment.chain_len();
        let Some(k) = self.dofs[..n].iter().position(|&d| d == dof) else {
            return Matrix3::zeros();
        };
        let mut m = self.prefix[k] * self.derivatives[k];
        for f in &self.factors[k + 1..n] {
            m *= f;
        }
        m
    }
}

/// Orientation of the four segments at one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentFrames {
    pub pelvis: Matrix3<f64>,
    pub thigh: Matrix3<f64>,
    pub shank: Matrix3<f64>,
    pub foot: Matrix3<f64>,
}

impl SegmentFrames {
    pub fn get(&self, segment: Segment) -> &Matrix3<f64> {
        match segment {
            Segment::Pelvis => &self.pelvis,
            Segment::Thigh => &self.thigh,
            Segment::Shank => &self.shank,
            Segment::Foot => &self.foot,
        }
    }
}

/// Composes the pelvis, thigh, shank and foot frames from one posture.
pub fn compose_segment_frames(angles: &AnatomicalAngles, side: Laterality) -> Result<SegmentFrames> {
    if !angles.is_finite() {
        return Err(Error::NonFiniteAngle { sample: 0 });
    }
    let chain = RotationChain::new(angles, side);
    Ok(SegmentFrames {
        pelvis: chain.frame(Segment::Pelvis),
        thigh: chain.frame(Segment::Thigh),
        shank: chain.frame(Segment::Shank),
        foot: chain.frame(Segment::Foot),
    })
}

/// Composes frames for every sample; the first non-finite sample is reported by index.
pub fn compose_series(angles: &[AnatomicalAngles], side: Laterality) -> Result<Vec<SegmentFrames>> {
    angles
        .iter()
        .enumerate()
        .map(|(i, a)| compose_segment_frames(a, side).map_err(|_| Error::NonFiniteAngle { sample: i }))
        .collect()
}

/// Entries below this magnitude in both atan2 arguments mark a degenerate sample.
pub const GIMBAL_EPS: f64 = 1e-12;

/// Elevation of one segment: `atan2(-R[0][1], R[1][1])`, or `None` when the
/// segment axis is (numerically) perpendicular to the sagittal plane.
pub fn elevation_angle(r: &Matrix3<f64>) -> Option<f64> {
    let (y, x) = (-r[(0, 1)], r[(1, 1)]);
    if y.abs() < GIMBAL_EPS && x.abs() < GIMBAL_EPS {
        None
    } else {
        Some(y.atan2(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElevationAngles {
    pub pelvis: f64,
    pub thigh: f64,
    pub shank: f64,
    pub foot: f64,
}

impl ElevationAngles {
    pub fn get(&self, segment: Segment) -> f64 {
        match segment {
            Segment::Pelvis => self.pelvis,
            Segment::Thigh => self.thigh,
            Segment::Shank => self.shank,
            Segment::Foot => self.foot,
        }
    }
}

/// Elevation angles of all four segments, `None` if any segment is degenerate.
pub fn elevation_angles(frames: &SegmentFrames) -> Option<ElevationAngles> {
    Some(ElevationAngles {
        pelvis: elevation_angle(&frames.pelvis)?,
        thigh: elevation_angle(&frames.thigh)?,
        shank: elevation_angle(&frames.shank)?,
        foot: elevation_angle(&frames.foot)?,
    })
}

/// Closed-form sagittal elevation angles; only valid when every out-of-plane
/// component is zero.
pub fn planar_elevation_closed_form(angles: &AnatomicalAngles) -> Result<ElevationAngles> {
    let q = angles.to_q();
    for i in (0..JOINT_DOFS).filter(|i| !dof::SAGITTAL.contains(i)) {
        if q[i] != 0.0 {
            return Err(Error::NotSagittal {
                component: dof::NAMES[i],
                value: q[i],
            });
        }
    }
    let pelvis = -angles.pelvis.flexion;
    let thigh = pelvis + angles.hip.flexion;
    let shank = thigh - angles.knee.flexion;
    let foot = shank + angles.ankle.flexion + FRAC_PI_2;
    Ok(ElevationAngles {
        pelvis,
        thigh,
        shank,
        foot,
    })
}

/// Removes 2π jumps in place so consecutive finite samples differ by at most π.
/// Non-finite samples are skipped and do not reset the reference.
pub fn unwrap_angles(values: &mut [f64]) {
    let mut prev: Option<f64> = None;
    for v in values.iter_mut() {
        if !v.is_finite() {
            continue;
        }
        if let Some(p) = prev {
            let d = *v - p;
            if d.abs() > PI {
                *v -= (2.0 * PI) * (d / (2.0 * PI)).round();
            }
        }
        prev = Some(*v);
    }
}

/// Sagittal elevation angles (radians) and limb elevation rates (rad/s) over
/// a sample grid. Degenerate samples hold NaN and are listed in `flagged`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ElevationSeries {
    pub pelvis: Vec<f64>,
    pub thigh: Vec<f64>,
    pub shank: Vec<f64>,
    pub foot: Vec<f64>,
    pub thigh_rate: Vec<f64>,
    pub shank_rate: Vec<f64>,
    pub foot_rate: Vec<f64>,
    pub flagged: Vec<usize>,
}

impl ElevationSeries {
    pub fn len(&self) -> usize {
        self.thigh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thigh.is_empty()
    }

    /// `(α_t, α_s, α_f)` per sample.
    pub fn limb_points(&self) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|k| [self.thigh[k], self.shank[k], self.foot[k]])
            .collect()
    }

    pub fn limb_rates(&self) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|k| [self.thigh_rate[k], self.shank_rate[k], self.foot_rate[k]])
            .collect()
    }
}

/// Unwrapped elevation angles for a frame series. Returns the four channels
/// and the indices of gimbal-degenerate samples (which hold NaN).
pub fn elevation_tracks(frames: &[SegmentFrames]) -> ([Vec<f64>; 4], Vec<usize>) {
    let mut tracks: [Vec<f64>; 4] = Default::default();
    let mut flagged = Vec::new();
    for (k, f) in frames.iter().enumerate() {
        let mut degenerate = false;
        for (track, seg) in tracks.iter_mut().zip(Segment::ALL) {
            match elevation_angle(f.get(seg)) {
                Some(a) => track.push(a),
                None => {
                    degenerate = true;
                    track.push(f64::NAN);
                }
            }
        }
        if degenerate {
            flagged.push(k);
            for t in tracks.iter_mut() {
                *t.last_mut().unwrap() = f64::NAN;
            }
        }
    }
    for t in tracks.iter_mut() {
        unwrap_angles(t);
    }
    (tracks, flagged)
}

/// Elevation angles and Ω-extracted elevation rates from a uniformly sampled
/// frame series.
pub fn elevation_series(frames: &[SegmentFrames], dt: f64, side: Laterality) -> Result<ElevationSeries> {
    let rates = segment_angular_velocities(frames, dt, side)?;
    let ([pelvis, thigh, shank, foot], flagged) = elevation_tracks(frames);
    Ok(ElevationSeries {
        pelvis,
        thigh,
        shank,
        foot,
        thigh_rate: rates.iter().map(|r| r.thigh.alpha_dot).collect(),
        shank_rate: rates.iter().map(|r| r.shank.alpha_dot).collect(),
        foot_rate: rates.iter().map(|r| r.foot.alpha_dot).collect(),
        flagged,
    })
}

/// Numerical scheme for `Ṙ` in `Ω = Ṙ Rᵀ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceScheme {
    /// Central difference on the rotation group: `Ω ≈ log(R(k+1) R(k-1)ᵀ) / 2dt`,
    /// one-sided at the ends. Exact for constant angular velocity.
    #[default]
    Geodesic,
    /// Element-wise central differences of `R`, one-sided at the ends.
    ElementWise,
}

/// Angular velocity of one segment: the skew matrix and its components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentRate {
    pub omega: Matrix3<f64>,
    pub alpha_dot: f64,
    pub beta_dot: f64,
    pub gamma_dot: f64,
}

impl SegmentRate {
    /// Antisymmetrizes `omega` and reads `(α̇, β̇, γ̇)` using the side's layout.
    pub fn from_omega(omega: Matrix3<f64>, side: Laterality) -> Self {
        let omega = (omega - omega.transpose()) * 0.5;
        let (beta_dot, gamma_dot) = match side {
            Laterality::Right => (omega[(1, 2)], omega[(2, 0)]),
            Laterality::Left => (omega[(2, 1)], omega[(0, 2)]),
        };
        Self {
            omega,
            alpha_dot: omega[(1, 0)],
            beta_dot,
            gamma_dot,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentAngularVelocity {
    pub pelvis: SegmentRate,
    pub thigh: SegmentRate,
    pub shank: SegmentRate,
    pub foot: SegmentRate,
}

impl SegmentAngularVelocity {
    pub fn get(&self, segment: Segment) -> &SegmentRate {
        match segment {
            Segment::Pelvis => &self.pelvis,
            Segment::Thigh => &self.thigh,
            Segment::Shank => &self.shank,
            Segment::Foot => &self.foot,
        }
    }
}

pub fn segment_angular_velocities(
    frames: &[SegmentFrames],
    dt: f64,
    side: Laterality,
) -> Result<Vec<SegmentAngularVelocity>> {
    segment_angular_velocities_with(frames, dt, side, DifferenceScheme::default())
}

pub fn segment_angular_velocities_with(
    frames: &[SegmentFrames],
    dt: f64,
    side: Laterality,
    scheme: DifferenceScheme,
) -> Result<Vec<SegmentAngularVelocity>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let n = frames.len();
    if n < 3 {
        return Err(Error::TooFewSamples {
            required: 3,
            actual: n,
        });
    }
    let omega = |seg: Segment, k: usize| -> Matrix3<f64> {
        let (lo, hi) = if k == 0 {
            (0, 1)
        } else if k == n - 1 {
            (n - 2, n - 1)
        } else {
            (k - 1, k + 1)
        };
        let span = dt * (hi - lo) as f64;
        let (a, b) = (frames[lo].get(seg), frames[hi].get(seg));
        match scheme {
            DifferenceScheme::Geodesic => {
                let rel = Rotation3::from_matrix_unchecked(b * a.transpose());
                let w: Vector3<f64> = rel.scaled_axis() / span;
                w.cross_matrix()
            }
            DifferenceScheme::ElementWise => (b - a) / span * frames[k].get(seg).transpose(),
        }
    };
    Ok((0..n)
        .map(|k| {
            let rate = |seg| SegmentRate::from_omega(omega(seg, k), side);
            SegmentAngularVelocity {
                pelvis: rate(Segment::Pelvis),
                thigh: rate(Segment::Thigh),
                shank: rate(Segment::Shank),
                foot: rate(Segment::Foot),
            }
        })
        .collect())
}
