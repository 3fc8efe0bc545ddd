//! Pinhole camera model and rectified stereo rig.
//!
//! Conventions: pixel `(u, v)` samples the continuous image plane at `(u, v)`
//! (column, row), the default principal point is the image center
//! `((W - 1) / 2, (H - 1) / 2)`, and every length is in millimeters. Images are
//! assumed rectified, so there is no distortion model.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Intrinsics from a horizontal field of view, square pixels, centered
    /// principal point: `fx = (width / 2) / tan(fov / 2)`.
    pub fn from_fov(fov_degrees: f64, width: usize, height: usize) -> Result<Self> {
        if !(fov_degrees > 0.0 && fov_degrees < 180.0) {
            return Err(Error::Domain(format!(
                "field of view must lie in (0, 180) degrees, got {fov_degrees}"
            )));
        }
        let half = (fov_degrees * 0.5).to_radians();
        let fx = (width as f64 * 0.5) / half.tan();
        Intrinsics::new(
            fx,
            fx,
            (width as f64 - 1.0) * 0.5,
            (height as f64 - 1.0) * 0.5,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Domain("image size must be positive".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::Domain(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) || !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::Domain(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Projects a camera-frame point to `(u, v, z)`.
    pub fn project(&self, p: &Point3<f64>) -> Result<(f64, f64, f64)> {
        if !(p.z > 0.0) {
            return Err(Error::NonPositiveDepth(p.z));
        }
        Ok(self.project_unchecked(p))
    }

    #[inline]
    pub(crate) fn project_unchecked(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        let inv_z = 1.0 / p.z;
        (
            self.fx * p.x * inv_z + self.cx,
            self.fy * p.y * inv_z + self.cy,
            p.z,
        )
    }

    /// Lifts pixel `(u, v)` at the given depth back into the camera frame.
    pub fn backproject(&self, u: f64, v: f64, depth: f64) -> Result<Point3<f64>> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::Domain(format!("depth must be positive, got {depth}")));
        }
        Ok(self.backproject_unchecked(u, v, depth))
    }

    #[inline]
    pub(crate) fn backproject_unchecked(&self, u: f64, v: f64, depth: f64) -> Point3<f64> {
        Point3::new(
            (u - self.cx) / self.fx * depth,
            (v - self.cy) / self.fy * depth,
            depth,
        )
    }

    /// Unit-depth viewing ray through pixel `(u, v)` (z component is 1).
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    #[inline]
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Rectified stereo pair sharing one set of intrinsics. The right camera sits
/// at `+baseline` along the left camera's x axis with no rotation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StereoRig {
    pub intrinsics: Intrinsics,
    /// Millimeters.
    pub baseline: f64,
}

impl StereoRig {
    /// Baseline of the arthroscope used to record the training data.
    pub const ARTHROSCOPE_BASELINE_MM: f64 = 1.52;
    /// Its horizontal field of view.
    pub const ARTHROSCOPE_FOV_DEG: f64 = 87.5;

    pub fn new(intrinsics: Intrinsics, baseline: f64) -> Result<Self> {
        intrinsics.validate()?;
        if !(baseline >= 0.0) || !baseline.is_finite() {
            return Err(Error::Domain(format!("baseline must be non-negative, got {baseline}")));
        }
        Ok(StereoRig {
            intrinsics,
            baseline,
        })
    }

    /// The arthroscope rig at the working resolution `size x size`.
    pub fn arthroscope(size: usize) -> Result<Self> {
        StereoRig::new(
            Intrinsics::from_fov(Self::ARTHROSCOPE_FOV_DEG, size, size)?,
            Self::ARTHROSCOPE_BASELINE_MM,
        )
    }

    /// Horizontal disparity in pixels of a point at depth `z`.
    pub fn disparity(&self, z: f64) -> f64 {
        self.intrinsics.fx * self.baseline / z
    }
}
