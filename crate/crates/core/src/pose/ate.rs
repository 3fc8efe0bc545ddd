use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{geodesic_angle, Trajectory};
use crate::error::{Error, Result};

const TIMESTAMP_TOL: f64 = 1e-6;

/// Absolute trajectory error summary. Distances in millimeters, angles in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AteReport {
    pub rmse_translation: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub per_frame_errors: Vec<f64>,
    /// Geodesic angle between ground-truth and (aligned) estimated orientation.
    pub per_frame_rotation_errors: Vec<f64>,
    pub aligned: bool,
}

/// Absolute trajectory error between camera positions.
///
/// With `align`, the estimated positions are first moved by the least-squares
/// rigid transform (rotation and translation, no scale) onto the ground truth.
pub fn ate(gt: &Trajectory, est: &Trajectory, align: bool) -> Result<AteReport> {
    if gt.len() != est.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: est.len(),
        });
    }
    for (i, (a, b)) in gt.timestamps().zip(est.timestamps()).enumerate() {
        if (a - b).abs() > TIMESTAMP_TOL {
            return Err(Error::TimestampMismatch { index: i, a, b });
        }
    }
    if gt.is_empty() {
        return Err(Error::Empty("trajectories"));
    }

    let gt_pos: Vec<Vector3<f64>> = gt.poses().map(|p| p.translation()).collect();
    let est_pos: Vec<Vector3<f64>> = est.poses().map(|p| p.translation()).collect();

    let (r, t) = if align {
        rigid_alignment(&est_pos, &gt_pos)
    } else {
        (Matrix3::identity(), Vector3::zeros())
    };

    let per_frame_errors: Vec<f64> = gt_pos
        .iter()
        .zip(&est_pos)
        .map(|(g, e)| (g - (r * e + t)).norm())
        .collect();
    let per_frame_rotation_errors = gt
        .poses()
        .zip(est.poses())
        .map(|(g, e)| geodesic_angle(&(g.rotation().transpose() * r * e.rotation())))
        .collect();

    let n = per_frame_errors.len() as f64;
    let rmse = (per_frame_errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mean = per_frame_errors.iter().sum::<f64>() / n;
    let max = per_frame_errors.iter().cloned().fold(0.0, f64::max);
    let mut sorted = per_frame_errors.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };

    Ok(AteReport {
        rmse_translation: rmse,
        mean,
        median,
        max,
        per_frame_errors,
        per_frame_rotation_errors,
        aligned: align,
    })
}

/// Least-squares `(R, t)` with `target ~ R * source + t` (Kabsch, no scale).
pub(crate) fn rigid_alignment(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
) -> (Matrix3<f64>, Vector3<f64>) {
    let n = source.len() as f64;
    let cs = source.iter().sum::<Vector3<f64>>() / n;
    let ct = target.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (s - cs) * (t - ct).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return (Matrix3::identity(), ct - cs),
    };
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = v * d * u.transpose();
    (r, ct - r * cs)
}
