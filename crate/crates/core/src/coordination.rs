//! Covariation plane (PCA) of three-signal trajectories, planarity index,
//! PC scores, shank–foot coupling fit and plane-constrained prediction.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PCA of a 3-signal trajectory. `axes[i]` is the i-th principal direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvpModel {
    pub mean: [f64; 3],
    pub axes: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
    /// Percent of variance in the first two components.
    pub planarity_index: f64,
    pub samples: usize,
}

/// Keeps only finite points.
fn finite_points(points: &[[f64; 3]]) -> Vec<Vector3<f64>> {
    points
        .iter()
        .filter(|p| p.iter().all(|v| v.is_finite()))
        .map(|p| Vector3::from(*p))
        .collect()
}

/// Unscaled, mean-centered PCA with an `N − 1` covariance divisor.
/// Non-finite samples are dropped before fitting.
pub fn fit_cvp(points: &[[f64; 3]]) -> Result<CvpModel> {
    let pts = finite_points(points);
    let n = pts.len();
    if n < 4 {
        return Err(Error::TooFewSamples {
            required: 4,
            actual: n,
        });
    }
    let mean = pts.iter().sum::<Vector3<f64>>() / n as f64;
    let cov = pts
        .iter()
        .map(|p| {
            let d = p - mean;
            d * d.transpose()
        })
        .sum::<Matrix3<f64>>()
        / (n - 1) as f64;
    if cov.trace() <= 0.0 {
        return Err(Error::DegenerateModel("trajectory is constant".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut eigenvalues = [0.0; 3];
    let mut axes = [[0.0; 3]; 3];
    for (slot, &i) in order.iter().enumerate() {
        eigenvalues[slot] = eig.eigenvalues[i].max(0.0);
        let mut u = eig.eigenvectors.column(i).normalize();
        let lead = u.iamax();
        if u[lead] < 0.0 {
            u = -u;
        }
        axes[slot] = [u[0], u[1], u[2]];
    }
    Ok(CvpModel {
        mean: mean.into(),
        axes,
        eigenvalues,
        planarity_index: planarity_index(&eigenvalues)?,
        samples: n,
    })
}

/// `(λ1 + λ2) / (λ1 + λ2 + λ3) · 100` for descending eigenvalues.
pub fn planarity_index(eigenvalues: &[f64; 3]) -> Result<f64> {
    let total: f64 = eigenvalues.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateModel("eigenvalue sum is not positive".into()));
    }
    Ok((eigenvalues[0] + eigenvalues[1]) / total * 100.0)
}

impl CvpModel {
    pub fn planarity_index(&self) -> Result<f64> {
        planarity_index(&self.eigenvalues)
    }

    pub fn normal(&self) -> [f64; 3] {
        self.axes[2]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcScores {
    pub scores: Vec<[f64; 3]>,
    /// `max |s3|`, in the units of the input.
    pub max_out_of_plane: f64,
}

/// `s_i(t) = u_i · (x(t) − μ)`. Non-finite samples give NaN scores.
pub fn pc_scores(points: &[[f64; 3]], model: &CvpModel) -> Result<PcScores> {
    if model.eigenvalues.iter().sum::<f64>() <= 0.0 {
        return Err(Error::DegenerateModel("zero-variance model".into()));
    }
    let mu = Vector3::from(model.mean);
    let axes = model.axes.map(Vector3::from);
    let scores: Vec<[f64; 3]> = points
        .iter()
        .map(|p| {
            let d = Vector3::from(*p) - mu;
            [axes[0].dot(&d), axes[1].dot(&d), axes[2].dot(&d)]
        })
        .collect();
    let max_out_of_plane = scores
        .iter()
        .map(|s| s[2].abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    Ok(PcScores {
        scores,
        max_out_of_plane,
    })
}

/// Inclusive sample range `[start, end]` of the swing phase on a stride grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwingWindow {
    pub start: usize,
    pub end: usize,
}

impl SwingWindow {
    /// Swing from the toe-off sample to the last grid sample (next heel
    /// strike), trimming `trim` of the window length from each end.
    pub fn from_toe_off(toe_off: usize, grid_len: usize, trim: f64) -> Result<Self> {
        if grid_len == 0 || toe_off >= grid_len {
            return Err(Error::InvalidEvents(format!(
                "toe-off sample {toe_off} outside grid of {grid_len}"
            )));
        }
        let end = grid_len - 1;
        let cut = ((end - toe_off) as f64 * trim.clamp(0.0, 0.49)).floor() as usize;
        Ok(Self {
            start: toe_off + cut,
            end: end - cut,
        })
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearCouplingFit {
    pub slope: f64,
    /// Same units as the inputs (degrees in reports).
    pub bias: f64,
    pub r_squared: f64,
    pub region: SwingWindow,
}

/// Least-squares `shank = slope · foot + bias` over the swing window.
pub fn shank_foot_fit(shank: &[f64], foot: &[f64], window: SwingWindow) -> Result<LinearCouplingFit> {
    if shank.len() != foot.len() {
        return Err(Error::LengthMismatch {
            what: "foot",
            expected: shank.len(),
            actual: foot.len(),
        });
    }
    if window.end >= shank.len() || window.is_empty() {
        return Err(Error::InvalidEvents(format!(
            "swing window {}..={} outside series of {}",
            window.start,
            window.end,
            shank.len()
        )));
    }
    let pts: Vec<(f64, f64)> = (window.start..=window.end)
        .map(|k| (foot[k], shank[k]))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if pts.len() < 5 {
        return Err(Error::SwingTooShort(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateModel("foot angle constant over swing".into()));
    }
    let slope = sxy / sxx;
    let bias = my - slope * mx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(LinearCouplingFit {
        slope,
        bias,
        r_squared,
        region: window,
    })
}

/// Plane `n · x = d` in (thigh, shank, foot) coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneConstraint {
    pub normal: [f64; 3],
    pub offset: f64,
}

/// Below this `|n_s|` the plane cannot be solved for the shank.
pub const MIN_SHANK_NORMAL: f64 = 1e-6;

impl PlaneConstraint {
    pub fn from_model(model: &CvpModel) -> Self {
        let n = Vector3::from(model.axes[2]).normalize();
        Self {
            normal: n.into(),
            offset: n.dot(&Vector3::from(model.mean)),
        }
    }

    /// `n · x − d`.
    pub fn residual(&self, p: [f64; 3]) -> f64 {
        Vector3::from(self.normal).dot(&Vector3::from(p)) - self.offset
    }
}

/// Shank values that place each (thigh, ·, foot) sample on the plane.
pub fn predict_shank(plane: &PlaneConstraint, thigh: &[f64], foot: &[f64]) -> Result<Vec<f64>> {
    if thigh.len() != foot.len() {
        return Err(Error::LengthMismatch {
            what: "foot",
            expected: thigh.len(),
            actual: foot.len(),
        });
    }
    let [nt, ns, nf] = plane.normal;
    if ns.abs() <= MIN_SHANK_NORMAL {
        return Err(Error::DegenerateConstraint(ns));
    }
    Ok(thigh
        .iter()
        .zip(foot)
        .map(|(t, f)| (plane.offset - nt * t - nf * f) / ns)
        .collect())
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    /// `None` for an empty input; `sd` is 0 for a single value.
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, sd, n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    /// Ellipse with half-axes a, b spanned by e1, e2 around c.
    fn ellipse(a: f64, b: f64, e1: Vector3<f64>, e2: Vector3<f64>, c: Vector3<f64>, n: usize) -> Vec<[f64; 3]> {
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                (c + e1 * a * t.cos() + e2 * b * t.sin()).into()
            })
            .collect()
    }

    fn tilted_basis() -> (Vector3<f64>, Vector3<f64>) {
        let e1 = Vector3::new(1.0, 2.0, -1.0).normalize();
        let e2 = e1.cross(&Vector3::new(0.3, -0.2, 1.0)).normalize();
        (e1, e2)
    }

    #[test]
    fn planar_loop_is_fully_planar() {
        let (e1, e2) = tilted_basis();
        let pts = ellipse(30.0, 10.0, e1, e2, Vector3::new(10.0, -20.0, 90.0), 101);
        let m = fit_cvp(&pts).unwrap();
        assert_abs_diff_eq!(m.planarity_index, 100.0, epsilon = 1e-9);
        let s = pc_scores(&pts, &m).unwrap();
        assert!(s.max_out_of_plane < 1e-9);
    }

    #[test]
    fn ellipse_score_variances() {
        // variance of a·cos over a full period (N−1 divisor) = a² N / (2(N−1))
        let n = 400;
        let (a, b) = (25.0, 8.0);
        let (e1, e2) = tilted_basis();
        let pts = ellipse(a, b, e1, e2, Vector3::new(1.0, 2.0, 3.0), n);
        let m = fit_cvp(&pts).unwrap();
        let corr = n as f64 / (n - 1) as f64;
        assert_abs_diff_eq!(m.eigenvalues[0], a * a / 2.0 * corr, epsilon = 1e-9);
        assert_abs_diff_eq!(m.eigenvalues[1], b * b / 2.0 * corr, epsilon = 1e-9);
        let s = pc_scores(&pts, &m).unwrap();
        for i in 0..3 {
            let col: Vec<f64> = s.scores.iter().map(|v| v[i]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((var - m.eigenvalues[i]).abs() <= 1e-9 * m.eigenvalues[0]);
        }
        // the first axis recovers ±e1
        let u1 = Vector3::from(m.axes[0]);
        assert_abs_diff_eq!(u1.dot(&e1).abs(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn isotropic_cloud_is_two_thirds() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts: Vec<[f64; 3]> = (0..100_000)
            .map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut rng)))
            .collect();
        let m = fit_cvp(&pts).unwrap();
        assert!((m.planarity_index - 200.0 / 3.0).abs() < 0.5);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_cvp(&[[0.0; 3]; 3]), Err(Error::TooFewSamples { .. })));
        assert!(matches!(fit_cvp(&[[1.0, 2.0, 3.0]; 10]), Err(Error::DegenerateModel(_))));
    }

    #[test]
    fn non_finite_samples_excluded() {
        let (e1, e2) = tilted_basis();
        let mut pts = ellipse(3.0, 1.0, e1, e2, Vector3::zeros(), 60);
        let clean = fit_cvp(&pts).unwrap();
        pts.push([f64::NAN, 0.0, 0.0]);
        let m = fit_cvp(&pts).unwrap();
        assert_eq!(m.samples, 60);
        assert_eq!(m.eigenvalues, clean.eigenvalues);
    }

    #[test]
    fn axis_signs_are_deterministic() {
        let (e1, e2) = tilted_basis();
        let pts = ellipse(5.0, 2.0, -e1, e2, Vector3::zeros(), 50);
        let m = fit_cvp(&pts).unwrap();
        for u in m.axes {
            let lead = u.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn planarity_index_arithmetic() {
        assert_eq!(planarity_index(&[1.0, 1.0, 0.0]).unwrap(), 100.0);
        assert_abs_diff_eq!(planarity_index(&[1.0, 1.0, 1.0]).unwrap(), 66.666_666_666, epsilon = 1e-6);
        assert_abs_diff_eq!(planarity_index(&[0.98, 0.019, 0.001]).unwrap(), 99.9, epsilon = 1e-12);
        assert!(planarity_index(&[0.0; 3]).is_err());
    }

    #[test]
    fn constant_offset_fit() {
        let foot: Vec<f64> = (0..40).map(|k| 20.0 + k as f64).collect();
        let shank: Vec<f64> = foot.iter().map(|f| f - 12.5).collect();
        let fit = shank_foot_fit(&shank, &foot, SwingWindow { start: 0, end: 39 }).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.bias, -12.5, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn locked_ankle_fit() {
        // rigid shank-foot: α_f = α_s + 90°
        let shank: Vec<f64> = (0..101).map(|k| -40.0 + 50.0 * (k as f64 * 0.03).sin()).collect();
        let foot: Vec<f64> = shank.iter().map(|s| s + 90.0).collect();
        let w = SwingWindow::from_toe_off(60, 101, 0.0).unwrap();
        let fit = shank_foot_fit(&shank, &foot, w).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.bias, -90.0, epsilon = 1e-10);
    }

    #[test]
    fn swing_window_rules() {
        let w = SwingWindow::from_toe_off(60, 101, 0.0).unwrap();
        assert_eq!((w.start, w.end, w.len()), (60, 100, 41));
        let t = SwingWindow::from_toe_off(60, 101, 0.1).unwrap();
        assert_eq!((t.start, t.end), (64, 96));
        assert!(SwingWindow::from_toe_off(101, 101, 0.0).is_err());
        let shank = vec![0.0; 101];
        let short = SwingWindow::from_toe_off(97, 101, 0.0).unwrap();
        assert!(matches!(shank_foot_fit(&shank, &shank, short), Err(Error::SwingTooShort(4))));
    }

    #[test]
    fn prediction_lies_on_plane() {
        let plane = PlaneConstraint {
            normal: Vector3::new(0.3, -0.8, 0.5).normalize().into(),
            offset: 4.0,
        };
        let thigh: Vec<f64> = (0..101).map(|k| 20.0 * (k as f64 * 0.06).cos()).collect();
        let foot: Vec<f64> = (0..101).map(|k| 90.0 + 40.0 * (k as f64 * 0.06).sin()).collect();
        let shank = predict_shank(&plane, &thigh, &foot).unwrap();
        for k in 0..101 {
            assert!(plane.residual([thigh[k], shank[k], foot[k]]).abs() < 1e-10);
        }
    }

    #[test]
    fn prediction_recovers_removed_shank() {
        let (e1, e2) = tilted_basis();
        let pts = ellipse(30.0, 12.0, e1, e2, Vector3::new(5.0, -10.0, 70.0), 101);
        let m = fit_cvp(&pts).unwrap();
        let plane = PlaneConstraint::from_model(&m);
        let thigh: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let foot: Vec<f64> = pts.iter().map(|p| p[2]).collect();
        let shank = predict_shank(&plane, &thigh, &foot).unwrap();
        for (p, s) in pts.iter().zip(&shank) {
            assert_abs_diff_eq!(p[1], *s, epsilon = 1e-12 * p[1].abs().max(100.0));
        }
    }

    #[test]
    fn degenerate_plane_rejected() {
        let plane = PlaneConstraint {
            normal: [0.6, 1e-8, 0.8],
            offset: 1.0,
        };
        assert!(matches!(predict_shank(&plane, &[1.0], &[1.0]), Err(Error::DegenerateConstraint(_))));
    }

    #[test]
    fn mean_sd() {
        let s = MeanSd::of(&[97.0, 98.0, 99.0]).unwrap();
        assert_abs_diff_eq!(s.mean, 98.0);
        assert_abs_diff_eq!(s.sd, 1.0);
        assert!(MeanSd::of(&[]).is_none());
        assert_eq!(MeanSd::of(&[5.0]).unwrap().sd, 0.0);
    }

    fn cloud(seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..200)
            .map(|_| {
                let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                [10.0 * v[0], 3.0 * v[1], 0.5 * v[2] + v[0]]
            })
            .collect()
    }

    proptest! {
        #[test]
        fn pi_invariant_under_rotation_and_scale(
            seed in 0u64..1000,
            axis in prop::array::uniform3(-1.0f64..1.0),
            angle in -3.0f64..3.0,
            scale in 0.01f64..100.0,
        ) {
            let pts = cloud(seed);
            let base = fit_cvp(&pts).unwrap().planarity_index;
            let ax = Vector3::from(axis);
            prop_assume!(ax.norm() > 0.1);
            let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(ax), angle);
            let moved: Vec<[f64; 3]> = pts.iter().map(|p| (rot * Vector3::from(*p) * scale).into()).collect();
            let m = fit_cvp(&moved).unwrap();
            prop_assert!((m.planarity_index - base).abs() < 1e-8);
            // axes orthonormal
            for i in 0..3 {
                for j in 0..3 {
                    let d = Vector3::from(m.axes[i]).dot(&Vector3::from(m.axes[j]));
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((d - want).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn scores_reconstruct_points(seed in 0u64..1000) {
            let pts = cloud(seed);
            let m = fit_cvp(&pts).unwrap();
            let s = pc_scores(&pts, &m).unwrap();
            for (p, sc) in pts.iter().zip(&s.scores) {
                let r = Vector3::from(m.mean)
                    + (0..3).map(|i| Vector3::from(m.axes[i]) * sc[i]).sum::<Vector3<f64>>();
                prop_assert!((r - Vector3::from(*p)).abs().max() < 1e-10);
            }
        }

        #[test]
        fn fit_ignores_sample_order(seed in 0u64..1000, shift in 0usize..50) {
            let foot: Vec<f64> = cloud(seed).iter().map(|p| p[0]).take(50).collect();
            let shank: Vec<f64> = foot.iter().enumerate().map(|(k, f)| 0.8 * f - 70.0 + (k as f64).sin()).collect();
            let w = SwingWindow { start: 0, end: 49 };
            let a = shank_foot_fit(&shank, &foot, w).unwrap();
            let mut f2 = foot.clone();
            let mut s2 = shank.clone();
            f2.rotate_left(shift);
            s2.rotate_left(shift);
            let b = shank_foot_fit(&s2, &f2, w).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-10);
            prop_assert!((a.bias - b.bias).abs() < 1e-8);
        }
    }
}
