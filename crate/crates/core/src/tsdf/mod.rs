//! Truncated signed-distance volumes: projective fusion of posed depth and
//! label frames, trilinear queries and TV-L1 regularization.
//!
//! Voxel `(i, j, k)` has its center at `origin + voxel_size * (i, j, k)`.
//! Storage is x-fastest. Distances are normalized by the truncation band, so
//! every stored value lies in `[-1, 1]`; positive is in front of the surface.

mod fusion;
mod io;
mod tv_l1;

pub use fusion::{fuse_chunk, FusionChunk, FusionFrame, FusionParams};
pub use io::{decode_volume, encode_volume, read_volume, write_volume, VOLUME_MAGIC};
pub use tv_l1::{regularize_tv_l1, tv_l1_energy, TvL1Report};

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::raster::Label;

/// Fusion weight cap.
pub const DEFAULT_MAX_WEIGHT: f32 = 128.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TsdfVolume {
    origin: [f32; 3],
    voxel_size: f32,
    dims: [usize; 3],
    truncation: f32,
    max_weight: f32,
    pub(crate) sdf: Vec<f32>,
    pub(crate) weight: Vec<f32>,
    pub(crate) labels: Vec<[u16; 4]>,
}

impl TsdfVolume {
    /// Empty (fully unobserved) volume.
    pub fn new(origin: [f32; 3], voxel_size: f32, dims: [usize; 3], truncation: f32) -> Result<Self> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::Domain(format!("voxel size must be positive, got {voxel_size}")));
        }
        if !(truncation >= voxel_size) || !truncation.is_finite() {
            return Err(Error::Domain(format!(
                "truncation ({truncation}) must be at least the voxel size ({voxel_size})"
            )));
        }
        if dims.iter().any(|d| *d == 0) || origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Domain(format!("invalid volume layout {dims:?} at {origin:?}")));
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .filter(|n| *n <= 1 << 28)
            .ok_or_else(|| Error::Domain(format!("volume {dims:?} is too large")))?;
        Ok(TsdfVolume {
            origin,
            voxel_size,
            dims,
            truncation,
            max_weight: DEFAULT_MAX_WEIGHT,
            sdf: vec![1.0; n],
            weight: vec![0.0; n],
            labels: vec![[0; 4]; n],
        })
    }

    pub fn with_max_weight(mut self, w_max: f32) -> Self {
        self.max_weight = w_max;
        self
    }

    pub fn origin(&self) -> [f32; 3] {
        self.origin
    }

    pub fn voxel_size(&self) -> f32 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn truncation(&self) -> f32 {
        self.truncation
    }

    pub fn max_weight(&self) -> f32 {
        self.max_weight
    }

    pub fn len(&self) -> usize {
        self.sdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sdf.is_empty()
    }

    pub fn sdf_values(&self) -> &[f32] {
        &self.sdf
    }

    pub fn weights(&self) -> &[f32] {
        &self.weight
    }

    pub fn label_counts(&self) -> &[[u16; 4]] {
        &self.labels
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        let s = self.voxel_size as f64;
        Point3::new(
            self.origin[0] as f64 + s * i as f64,
            self.origin[1] as f64 + s * j as f64,
            self.origin[2] as f64 + s * k as f64,
        )
    }

    pub fn sdf_at(&self, i: usize, j: usize, k: usize) -> f32 {
        self.sdf[self.index(i, j, k)]
    }

    pub fn weight_at(&self, i: usize, j: usize, k: usize) -> f32 {
        self.weight[self.index(i, j, k)]
    }

    /// Overwrites one voxel; the value is clamped to `[-1, 1]` and the weight
    /// to `[0, max_weight]`.
    pub fn set_voxel(&mut self, i: usize, j: usize, k: usize, sdf: f32, weight: f32) {
        let idx = self.index(i, j, k);
        self.sdf[idx] = sdf.clamp(-1.0, 1.0);
        self.weight[idx] = weight.clamp(0.0, self.max_weight);
    }

    pub fn set_label_counts(&mut self, i: usize, j: usize, k: usize, counts: [u16; 4]) {
        let idx = self.index(i, j, k);
        self.labels[idx] = counts;
    }

    pub fn observed_count(&self) -> usize {
        self.weight.iter().filter(|w| **w > 0.0).count()
    }

    /// Trilinear interpolation at a world point. The flag is true when all
    /// eight surrounding voxels are observed; points outside the grid give
    /// `(0, false)`.
    pub fn query_sdf(&self, p: &Point3<f64>) -> (f64, bool) {
        let s = self.voxel_size as f64;
        let g = [
            (p.x - self.origin[0] as f64) / s,
            (p.y - self.origin[1] as f64) / s,
            (p.z - self.origin[2] as f64) / s,
        ];
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut f = [0.0; 3];
        for a in 0..3 {
            let max = (self.dims[a] - 1) as f64;
            if !(g[a] >= 0.0 && g[a] <= max) {
                return (0.0, false);
            }
            let fl = g[a].floor();
            lo[a] = fl as usize;
            hi[a] = (lo[a] + 1).min(self.dims[a] - 1);
            f[a] = g[a] - fl;
        }
        let mut value = 0.0;
        let mut observed = true;
        for corner in 0..8 {
            let pick = |a: usize| if corner >> a & 1 == 1 { (hi[a], f[a]) } else { (lo[a], 1.0 - f[a]) };
            let ((i, wi), (j, wj), (k, wk)) = (pick(0), pick(1), pick(2));
            let idx = self.index(i, j, k);
            let w = wi * wj * wk;
            observed &= self.weight[idx] > 0.0;
            if w != 0.0 {
                value += w * self.sdf[idx] as f64;
            }
        }
        (value, observed)
    }

    /// Majority label of a voxel, `None` if it never received a label.
    pub fn voxel_label(&self, idx: usize) -> Option<Label> {
        majority_label(&self.labels[idx])
    }
}

/// Majority vote over label counts. Ties go to the rarer, thinner structure:
/// ACL, then meniscus, then cartilage, then other.
pub fn majority_label(counts: &[u16; 4]) -> Option<Label> {
    const PRIORITY: [Label; 4] = [Label::Acl, Label::Meniscus, Label::Cartilage, Label::Other];
    let max = *counts.iter().max()?;
    if max == 0 {
        return None;
    }
    PRIORITY.into_iter().find(|l| counts[l.id() as usize] == max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_validation() {
        assert!(TsdfVolume::new([0.0; 3], 1.0, [4, 4, 4], 0.5).is_err());
        assert!(TsdfVolume::new([0.0; 3], 0.0, [4, 4, 4], 1.0).is_err());
        assert!(TsdfVolume::new([0.0; 3], 1.0, [0, 4, 4], 4.0).is_err());
        assert!(TsdfVolume::new([0.0; 3], 1.0, [1 << 10, 1 << 10, 1 << 10], 4.0).is_err());
        let v = TsdfVolume::new([0.0; 3], 1.0, [2, 3, 4], 4.0).unwrap();
        assert_eq!(v.len(), 24);
        assert_eq!(v.observed_count(), 0);
        assert_eq!(v.index(1, 2, 3), 1 + 2 * 2 + 3 * 6);
    }

    #[test]
    fn query_examples() {
        let mut v = TsdfVolume::new([10.0, 0.0, 0.0], 2.0, [2, 2, 2], 4.0).unwrap();
        for k in 0..2 {
            for j in 0..2 {
                v.set_voxel(0, j, k, -0.2, 1.0);
                v.set_voxel(1, j, k, 0.2, 1.0);
            }
        }
        let (s, obs) = v.query_sdf(&Point3::new(11.0, 1.0, 1.0));
        assert!(s.abs() < 1e-7 && obs);
        let (s, obs) = v.query_sdf(&Point3::new(12.0, 2.0, 2.0));
        assert_eq!((s, obs), (0.2f32 as f64, true));
        assert!(!v.query_sdf(&Point3::new(9.0, 0.0, 0.0)).1);

        let empty = TsdfVolume::new([0.0; 3], 1.0, [3, 3, 3], 2.0).unwrap();
        assert!(!empty.query_sdf(&Point3::new(1.0, 1.0, 1.0)).1);
    }

    #[test]
    fn label_majority_and_ties() {
        assert_eq!(majority_label(&[0, 0, 0, 0]), None);
        assert_eq!(majority_label(&[5, 1, 0, 0]), Some(Label::Other));
        assert_eq!(majority_label(&[3, 3, 0, 0]), Some(Label::Cartilage));
        assert_eq!(majority_label(&[2, 2, 2, 0]), Some(Label::Meniscus));
        assert_eq!(majority_label(&[1, 1, 1, 1]), Some(Label::Acl));
    }
}
