//! Reduced elevation-space Jacobian, elevation space moments (ESM) and the
//! joint-space vs elevation-space power comparison.

use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{AnatomicalAngles, Laterality, RotationChain, Segment, JOINT_DOFS};

/// Maps joint-angle velocities to `(α̇_t, α̇_s, α̇_f)`.
/// Rows are thigh, shank, foot; columns follow the joint-angle vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedJacobian {
    pub matrix: SMatrix<f64, 3, JOINT_DOFS>,
}

impl ReducedJacobian {
    pub fn limb_rates(&self, qdot: &[f64; JOINT_DOFS]) -> [f64; 3] {
        let v = self.matrix * SMatrix::<f64, JOINT_DOFS, 1>::from_column_slice(qdot);
        [v[0], v[1], v[2]]
    }
}

/// Column `j` is the sagittal component of `Ω = (∂R/∂q_j) Rᵀ` for each limb
/// segment, i.e. the elevation rate produced by unit velocity in `q_j`.
pub fn jacobian_at(angles: &AnatomicalAngles, side: Laterality) -> Result<ReducedJacobian> {
    if !angles.is_finite() {
        return Err(Error::NonFiniteAngle { sample: 0 });
    }
    let chain = RotationChain::new(angles, side);
    let mut matrix = SMatrix::<f64, 3, JOINT_DOFS>::zeros();
    for (row, seg) in Segment::LIMB.into_iter().enumerate() {
        let rt = chain.frame(seg).transpose();
        for j in 0..JOINT_DOFS {
            let omega = chain.partial(seg, j) * rt;
            matrix[(row, j)] = 0.5 * (omega[(1, 0)] - omega[(0, 1)]);
        }
    }
    Ok(ReducedJacobian { matrix })
}

/// Joint moments `τ = [0, 0, 0, τ_h, τ_k, τ_a]` in Nm/kg. Pelvis entries are
/// always zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointMoments([f64; JOINT_DOFS]);

impl JointMoments {
    /// Each joint as `[flexion, adduction, rotation]` (ankle: `[dorsiflexion, inversion, rotation]`).
    pub fn new(hip: [f64; 3], knee: [f64; 3], ankle: [f64; 3]) -> Self {
        let mut t = [0.0; JOINT_DOFS];
        t[3..6].copy_from_slice(&hip);
        t[6..9].copy_from_slice(&knee);
        t[9..12].copy_from_slice(&ankle);
        Self(t)
    }

    pub fn sagittal(hip: f64, knee: f64, ankle: f64) -> Self {
        Self::new([hip, 0.0, 0.0], [knee, 0.0, 0.0], [ankle, 0.0, 0.0])
    }

    /// From the nine hip/knee/ankle components in joint-vector order.
    pub fn from_joints(v: [f64; 9]) -> Self {
        let mut t = [0.0; JOINT_DOFS];
        t[3..].copy_from_slice(&v);
        Self(t)
    }

    pub fn as_array(&self) -> &[f64; JOINT_DOFS] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn power(&self, qdot: &[f64; JOINT_DOFS]) -> f64 {
        self.0.iter().zip(qdot).map(|(t, w)| t * w).sum()
    }
}

/// Relative singular-value cutoff for the pseudo-inverse.
pub const SVD_RTOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoInverse {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

/// Moore–Penrose pseudo-inverse via SVD. Singular values at or below
/// `rtol · σ_max` are treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>, rtol: f64) -> PseudoInverse {
    let (rows, cols) = m.shape();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("Vᵀ requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = rtol * sigma_max;
    let mut out = DMatrix::zeros(cols, rows);
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            out += v_t.row(i).transpose() * u.column(i).transpose() / s;
        }
    }
    PseudoInverse {
        matrix: out,
        rank,
        singular_values: svd.singular_values.iter().copied().collect(),
    }
}

/// Whether the pelvis columns of `J_α` take part in the moment mapping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PelvisColumns {
    /// Pelvis treated as fixed: only hip, knee and ankle columns are used,
    /// matching the zero pelvis torques.
    #[default]
    Excluded,
    /// All twelve columns enter the pseudo-inverse.
    Included,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsmOptions {
    pub pelvis: PelvisColumns,
    pub rtol: f64,
}

impl Default for EsmOptions {
    fn default() -> Self {
        Self {
            pelvis: PelvisColumns::default(),
            rtol: SVD_RTOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EsmSample {
    /// `(M_t, M_s, M_f)`.
    pub moments: [f64; 3],
    pub rank: usize,
}

impl EsmSample {
    pub fn is_full_rank(&self) -> bool {
        self.rank == 3
    }
}

/// The matrix `J_αᵀ` (12×3) actually inverted, after pelvis handling.
pub fn moment_map(jacobian: &ReducedJacobian, pelvis: PelvisColumns) -> DMatrix<f64> {
    let mut jt = DMatrix::from_fn(JOINT_DOFS, 3, |r, c| jacobian.matrix[(c, r)]);
    if pelvis == PelvisColumns::Excluded {
        jt.rows_mut(0, 3).fill(0.0);
    }
    jt
}

/// `M = (J_αᵀ)† τ` at one posture.
pub fn esm_at(jacobian: &ReducedJacobian, tau: &JointMoments, opts: &EsmOptions) -> EsmSample {
    let pinv = pseudo_inverse(&moment_map(jacobian, opts.pelvis), opts.rtol);
    let m = &pinv.matrix * DVector::from_column_slice(tau.as_array());
    EsmSample {
        moments: [m[0], m[1], m[2]],
        rank: pinv.rank,
    }
}

/// Elevation space moments over a grid. Rank-deficient or non-finite samples
/// hold NaN and are listed in `flagged`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EsmSeries {
    pub thigh: Vec<f64>,
    pub shank: Vec<f64>,
    pub foot: Vec<f64>,
    pub flagged: Vec<usize>,
}

impl EsmSeries {
    pub fn len(&self) -> usize {
        self.thigh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thigh.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|k| [self.thigh[k], self.shank[k], self.foot[k]])
            .collect()
    }

    fn push(&mut self, m: [f64; 3]) {
        self.thigh.push(m[0]);
        self.shank.push(m[1]);
        self.foot.push(m[2]);
    }
}

pub fn elevation_space_moments(
    angles: &[AnatomicalAngles],
    moments: &[JointMoments],
    side: Laterality,
    opts: &EsmOptions,
) -> Result<EsmSeries> {
    if angles.len() != moments.len() {
        return Err(Error::LengthMismatch {
            what: "moments",
            expected: angles.len(),
            actual: moments.len(),
        });
    }
    let mut out = EsmSeries::default();
    for (k, (q, tau)) in angles.iter().zip(moments).enumerate() {
        if !q.is_finite() || !tau.is_finite() {
            out.push([f64::NAN; 3]);
            out.flagged.push(k);
            continue;
        }
        let sample = esm_at(&jacobian_at(q, side)?, tau, opts);
        if sample.is_full_rank() {
            out.push(sample.moments);
        } else {
            out.push([f64::NAN; 3]);
            out.flagged.push(k);
        }
    }
    Ok(out)
}

/// Centered moving average with an odd window (shrunk at the edges). NaN
/// samples are skipped. Windows below 2 return the input unchanged.
pub fn smooth_series(values: &[f64], window: usize) -> Vec<f64> {
    if window < 2 {
        return values.to_vec();
    }
    let half = window / 2;
    (0..values.len())
        .map(|k| {
            if !values[k].is_finite() {
                return values[k];
            }
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(values.len() - 1);
            let (sum, n) = values[lo..=hi]
                .iter()
                .filter(|v| v.is_finite())
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            sum / n as f64
        })
        .collect()
}

/// Joint-space vs elevation-space power comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    /// `τᵀ q̇` per sample (W/kg).
    pub joint_power: Vec<f64>,
    /// `Mᵀ α̇` per sample (W/kg).
    pub esm_power: Vec<f64>,
    /// `None` when the joint power has zero variance.
    pub r_squared: Option<f64>,
    /// RMSE over the range of the joint power; `None` for zero range.
    pub nrmse: Option<f64>,
    pub samples_used: usize,
}

impl PowerReport {
    pub fn is_degenerate(&self) -> bool {
        self.r_squared.is_none()
    }
}

pub fn power_check(
    qdot: &[[f64; JOINT_DOFS]],
    moments: &[JointMoments],
    esm: &EsmSeries,
    alpha_dot: &[[f64; 3]],
) -> Result<PowerReport> {
    let n = qdot.len();
    for (what, len) in [("moments", moments.len()), ("esm", esm.len()), ("alpha_dot", alpha_dot.len())] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                actual: len,
            });
        }
    }
    let joint_power: Vec<f64> = moments.iter().zip(qdot).map(|(t, w)| t.power(w)).collect();
    let esm_power: Vec<f64> = (0..n)
        .map(|k| esm.thigh[k] * alpha_dot[k][0] + esm.shank[k] * alpha_dot[k][1] + esm.foot[k] * alpha_dot[k][2])
        .collect();
    let pairs: Vec<(f64, f64)> = joint_power
        .iter()
        .zip(&esm_power)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let used = pairs.len();
    let (r_squared, nrmse) = if used == 0 {
        (None, None)
    } else {
        let mean = pairs.iter().map(|p| p.0).sum::<f64>() / used as f64;
        let ss_tot: f64 = pairs.iter().map(|p| (p.0 - mean).powi(2)).sum();
        let ss_res: f64 = pairs.iter().map(|p| (p.0 - p.1).powi(2)).sum();
        let (lo, hi) = pairs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
        let range = hi - lo;
        let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
        let nrmse = (range > 0.0).then(|| (ss_res / used as f64).sqrt() / range);
        (r2, nrmse)
    };
    Ok(PowerReport {
        joint_power,
        esm_power,
        r_squared,
        nrmse,
        samples_used: used,
    })
}
