//! Rigid motions parameterized as Euler rotation plus translation, trajectories
//! and absolute trajectory error.
//!
//! The Euler convention is intrinsic X-Y-Z (roll, pitch, yaw):
//! `R = Rz(gamma) * Ry(beta) * Rx(alpha)`. Translations are in millimeters.

mod ate;
mod io;

pub use ate::{ate, AteReport};
pub use io::{
    format_trajectory, parse_quaternion_trajectory, parse_trajectory, read_quaternion_trajectory,
    read_trajectory, write_trajectory,
};

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a - 2.0 * PI * ((a - PI) / (2.0 * PI)).ceil();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// 6-DoF rigid transform `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSE3 {
    /// Euler angles `[alpha, beta, gamma]` in radians.
    pub rot: [f64; 3],
    /// Translation `[x, y, z]` in millimeters.
    pub trl: [f64; 3],
}

impl Default for PoseSE3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl PoseSE3 {
    pub const fn identity() -> Self {
        PoseSE3 {
            rot: [0.0; 3],
            trl: [0.0; 3],
        }
    }

    /// Builds a pose, wrapping the angles to `(-pi, pi]`.
    pub fn new(rot: [f64; 3], trl: [f64; 3]) -> Result<Self> {
        if rot.iter().chain(trl.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("pose components must be finite".into()));
        }
        Ok(PoseSE3 {
            rot: rot.map(wrap_angle),
            trl,
        })
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        PoseSE3 {
            rot: [0.0; 3],
            trl: [x, y, z],
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let [a, b, g] = self.rot;
        *Rotation3::from_euler_angles(a, b, g).matrix()
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.trl)
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation());
        m
    }

    /// Recovers the Euler parameters of a rotation matrix. At gimbal lock
    /// (`|beta| = pi/2`) alpha is set to 0 and the remaining rotation goes into gamma.
    pub fn from_rotation_translation(r: &Matrix3<f64>, t: &Vector3<f64>) -> Self {
        let sb = (-r[(2, 0)]).clamp(-1.0, 1.0);
        let beta = sb.asin();
        let cb = (r[(2, 1)] * r[(2, 1)] + r[(2, 2)] * r[(2, 2)]).sqrt();
        let (alpha, gamma) = if cb > 1e-12 {
            (r[(2, 1)].atan2(r[(2, 2)]), r[(1, 0)].atan2(r[(0, 0)]))
        } else {
            (0.0, (-r[(0, 1)]).atan2(r[(1, 1)]))
        };
        PoseSE3 {
            rot: [wrap_angle(alpha), wrap_angle(beta), wrap_angle(gamma)],
            trl: [t.x, t.y, t.z],
        }
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
        let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into();
        Self::from_rotation_translation(&r, &t)
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        let ra = self.rotation();
        let r = ra * other.rotation();
        let t = ra * other.translation() + self.translation();
        Self::from_rotation_translation(&r, &t)
    }

    pub fn inverse(&self) -> PoseSE3 {
        let rt = self.rotation().transpose();
        let t = -(rt * self.translation());
        Self::from_rotation_translation(&rt, &t)
    }

    /// Motion from frame `self` to frame `other`: `self^-1 * other`.
    pub fn relative(&self, other: &PoseSE3) -> PoseSE3 {
        self.inverse().compose(other)
    }

    #[inline]
    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation() * p + self.translation()
    }

    /// Angle of the rotation part, in radians.
    pub fn rotation_angle(&self) -> f64 {
        geodesic_angle(&self.rotation())
    }

    pub fn translation_norm(&self) -> f64 {
        self.translation().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.rot.iter().chain(self.trl.iter()).all(|v| v.is_finite())
    }

    /// The six parameters as `[alpha, beta, gamma, x, y, z]`.
    pub fn to_params(&self) -> [f64; 6] {
        let [a, b, g] = self.rot;
        let [x, y, z] = self.trl;
        [a, b, g, x, y, z]
    }

    pub fn from_params(p: &[f64; 6]) -> PoseSE3 {
        PoseSE3 {
            rot: [wrap_angle(p[0]), wrap_angle(p[1]), wrap_angle(p[2])],
            trl: [p[3], p[4], p[5]],
        }
    }
}

/// Precomputed rotation/translation for tight per-pixel loops.
#[derive(Clone, Copy, Debug)]
pub(crate) struct RigidMatrix {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl From<&PoseSE3> for RigidMatrix {
    fn from(p: &PoseSE3) -> Self {
        RigidMatrix {
            r: p.rotation(),
            t: p.translation(),
        }
    }
}

impl RigidMatrix {
    #[inline]
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        self.r * p + self.t
    }
}

/// Rotation angle of `r` in `[0, pi]`.
pub fn geodesic_angle(r: &Matrix3<f64>) -> f64 {
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    c.acos()
}

/// Time-stamped camera-to-world poses with strictly increasing timestamps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    frames: Vec<(f64, PoseSE3)>,
}

impl Trajectory {
    pub fn new(frames: Vec<(f64, PoseSE3)>) -> Result<Self> {
        for (i, w) in frames.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Domain(format!(
                    "timestamps must be strictly increasing (index {}: {} after {})",
                    i + 1,
                    w[1].0,
                    w[0].0
                )));
            }
        }
        if frames.iter().any(|(t, p)| !t.is_finite() || !p.is_finite()) {
            return Err(Error::Domain("trajectory contains non-finite values".into()));
        }
        Ok(Trajectory { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[(f64, PoseSE3)] {
        &self.frames
    }

    pub fn poses(&self) -> impl Iterator<Item = &PoseSE3> {
        self.frames.iter().map(|(_, p)| p)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(|(t, _)| *t)
    }

    pub fn pose(&self, i: usize) -> Option<&PoseSE3> {
        self.frames.get(i).map(|(_, p)| p)
    }

    /// Applies `tf` on the left of every pose (re-expresses the world frame).
    pub fn transformed(&self, tf: &PoseSE3) -> Trajectory {
        Trajectory {
            frames: self.frames.iter().map(|(t, p)| (*t, tf.compose(p))).collect(),
        }
    }

    /// Frame-to-frame motions `relative(pose_i, pose_{i+1})`.
    pub fn relative_motions(&self) -> Vec<PoseSE3> {
        self.frames.windows(2).map(|w| w[0].1.relative(&w[1].1)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &PoseSE3, b: &PoseSE3, tol: f64) -> bool {
        (a.to_matrix() - b.to_matrix()).abs().max() < tol
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5 + 4.0 * PI) - 0.5).abs() < 1e-12);
        assert!((wrap_angle(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotation_convention_is_zyx_product() {
        let p = PoseSE3::new([0.3, -0.2, 1.1], [0.0; 3]).unwrap();
        let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), 0.3);
        let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), -0.2);
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), 1.1);
        let expected = (rz * ry * rx).into_inner();
        assert!((p.rotation() - expected).abs().max() < 1e-14);
    }

    #[test]
    fn translations_add() {
        let a = PoseSE3::from_translation(1.0, 2.0, 3.0);
        let b = PoseSE3::from_translation(4.0, 5.0, 6.0);
        assert_eq!(a.compose(&b).trl, [5.0, 7.0, 9.0]);
        assert_eq!(a.inverse().trl, [-1.0, -2.0, -3.0]);
        assert_eq!(PoseSE3::identity().inverse(), PoseSE3::identity());
    }

    #[test]
    fn relative_of_translations() {
        let a = PoseSE3::identity();
        let b = PoseSE3::from_translation(1.0, 0.0, 0.0);
        assert_eq!(a.relative(&b).trl, [1.0, 0.0, 0.0]);
        let p = PoseSE3::new([0.1, 0.2, 0.3], [4.0, 5.0, 6.0]).unwrap();
        assert!(close(&p.relative(&p), &PoseSE3::identity(), 1e-12));
    }

    #[test]
    fn gimbal_lock_folds_into_gamma() {
        for beta in [PI / 2.0, -PI / 2.0] {
            let p = PoseSE3::new([0.4, beta, 0.1], [0.0; 3]).unwrap();
            let q = PoseSE3::from_rotation_translation(&p.rotation(), &Vector3::zeros());
            assert_eq!(q.rot[0], 0.0);
            assert!((q.rotation() - p.rotation()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(PoseSE3::new([f64::NAN, 0.0, 0.0], [0.0; 3]).is_err());
    }

    #[test]
    fn trajectory_requires_increasing_time() {
        let p = PoseSE3::identity();
        assert!(Trajectory::new(vec![(0.0, p), (0.0, p)]).is_err());
        assert!(Trajectory::new(vec![(0.0, p), (0.04, p)]).is_ok());
    }
}
