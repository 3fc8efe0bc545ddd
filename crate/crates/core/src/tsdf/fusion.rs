use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TsdfVolume;
use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::pose::PoseSE3;
use crate::raster::{DepthMap, LabelMap};

/// One posed frame; `pose` is camera-to-world.
#[derive(Clone, Debug)]
pub struct FusionFrame {
    pub depth: DepthMap,
    pub labels: Option<LabelMap>,
    pub pose: PoseSE3,
}

/// A short sequence fused into one local map. Typical chunks span 70 to 200
/// frames, one sweep of the scope around a single portal.
#[derive(Clone, Debug, Default)]
pub struct FusionChunk {
    pub frames: Vec<FusionFrame>,
}

impl FusionChunk {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Volume layout for [`fuse_chunk`]. Without `dims` the volume is fitted to
/// the observed points, padded by four truncation bands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionParams {
    pub voxel_size: f32,
    pub truncation: f32,
    pub origin: Option<[f32; 3]>,
    pub dims: Option<[usize; 3]>,
    pub max_weight: f32,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            voxel_size: 1.0,
            truncation: 4.0,
            origin: None,
            dims: None,
            max_weight: super::DEFAULT_MAX_WEIGHT,
        }
    }
}

impl TsdfVolume {
    /// Fuses one depth frame (and optional labels) seen from camera-to-world `pose`.
    ///
    /// Each voxel is projected into the frame; where the measured depth `d` is
    /// valid, the projective distance `d - z` updates a weighted running
    /// average unless the voxel lies more than one band behind the surface.
    /// Labels are counted only inside the band.
    pub fn integrate(
        &mut self,
        depth: &DepthMap,
        labels: Option<&LabelMap>,
        pose: &PoseSE3,
        k: &Intrinsics,
    ) -> Result<()> {
        if depth.width() != k.width || depth.height() != k.height {
            return Err(Error::dims(format!(
                "depth {}x{} vs intrinsics {}x{}",
                depth.width(),
                depth.height(),
                k.width,
                k.height
            )));
        }
        if let Some(l) = labels {
            if l.width() != k.width || l.height() != k.height {
                return Err(Error::dims("label map does not match depth"));
            }
        }
        if !pose.is_finite() {
            return Err(Error::Domain("pose must be finite".into()));
        }
        let world_to_cam = pose.inverse();
        let r = world_to_cam.rotation();
        let t = world_to_cam.translation();
        let trunc = self.truncation as f64;
        let w_max = self.max_weight;
        let [nx, ny, _] = self.dims;
        let slice = nx * ny;
        let origin = Vector3::new(self.origin[0] as f64, self.origin[1] as f64, self.origin[2] as f64);
        let s = self.voxel_size as f64;
        // columns of R scaled by voxel size: camera-frame step per voxel index
        let (step_i, step_j, step_k) = (r.column(0) * s, r.column(1) * s, r.column(2) * s);
        let base = r * origin + t;

        self.sdf
            .par_chunks_mut(slice)
            .zip(self.weight.par_chunks_mut(slice))
            .zip(self.labels.par_chunks_mut(slice))
            .enumerate()
            .for_each(|(kk, ((sdf, weight), counts))| {
                let plane = base + step_k * kk as f64;
                for j in 0..ny {
                    let row = plane + step_j * j as f64;
                    for i in 0..nx {
                        let pc = Point3::from(row + step_i * i as f64);
                        if !(pc.z > 0.0) {
                            continue;
                        }
                        let (u, v, z) = k.project_unchecked(&pc);
                        let Some(measured) = depth.sample(u, v, trunc) else {
                            continue;
                        };
                        let raw = measured - z;
                        if !(raw > -trunc) {
                            continue;
                        }
                        let idx = j * nx + i;
                        let obs = (raw / trunc).clamp(-1.0, 1.0) as f32;
                        let w = weight[idx];
                        sdf[idx] = ((w as f64 * sdf[idx] as f64 + obs as f64) / (w as f64 + 1.0)) as f32;
                        weight[idx] = (w + 1.0).min(w_max);
                        if let Some(lm) = labels {
                            if raw.abs() < trunc {
                                let (ur, vr) = (u.round() as usize, v.round() as usize);
                                if ur < lm.width() && vr < lm.height() {
                                    let c = &mut counts[idx][lm.get(ur, vr).id() as usize];
                                    *c = c.saturating_add(1);
                                }
                            }
                        }
                    }
                }
            });
        Ok(())
    }
}

fn fitted_layout(chunk: &FusionChunk, params: &FusionParams, k: &Intrinsics) -> Result<([f32; 3], [usize; 3])> {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for f in &chunk.frames {
        let r = f.pose.rotation();
        let t = f.pose.translation();
        for v in 0..f.depth.height() {
            for u in 0..f.depth.width() {
                if let Some(d) = f.depth.valid(u, v) {
                    let p = r * k.backproject_unchecked(u as f64, v as f64, d).coords + t;
                    lo = lo.inf(&p);
                    hi = hi.sup(&p);
                }
            }
        }
    }
    if !lo.x.is_finite() {
        return Err(Error::DegenerateDepth("no valid depth in chunk".into()));
    }
    let pad = 4.0 * params.truncation as f64;
    let s = params.voxel_size as f64;
    let lo = lo.add_scalar(-pad);
    let hi = hi.add_scalar(pad);
    let dims = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / s).ceil() as usize + 1);
    // snap the origin to the voxel lattice through zero
    let origin = [0, 1, 2].map(|a| ((lo[a] / s).floor() * s) as f32);
    Ok((origin, dims))
}

/// Fuses every frame of the chunk, in order, into a new volume.
pub fn fuse_chunk(chunk: &FusionChunk, params: &FusionParams, k: &Intrinsics) -> Result<TsdfVolume> {
    if chunk.is_empty() {
        return Err(Error::Empty("fusion chunk"));
    }
    let (origin, dims) = match (params.origin, params.dims) {
        (Some(o), Some(d)) => (o, d),
        _ => fitted_layout(chunk, params, k)?,
    };
    let mut vol = TsdfVolume::new(origin, params.voxel_size, dims, params.truncation)?.with_max_weight(params.max_weight);
    for f in &chunk.frames {
        vol.integrate(&f.depth, f.labels.as_ref(), &f.pose, k)?;
    }
    Ok(vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Label;

    fn plane_frame(k: &Intrinsics, d: f64, label: u8) -> (DepthMap, LabelMap) {
        (
            DepthMap::filled(k.width, k.height, d).unwrap(),
            LabelMap::new(k.width, k.height, vec![label; k.pixel_count()]).unwrap(),
        )
    }

    fn column_volume() -> TsdfVolume {
        // a column of voxels along the optical axis, z in [30, 50]
        TsdfVolume::new([-1.0, -1.0, 30.0], 0.5, [5, 5, 41], 2.0).unwrap()
    }

    #[test]
    fn plane_zero_crossing() {
        let k = Intrinsics::from_fov(60.0, 33, 33).unwrap();
        let (d, _) = plane_frame(&k, 40.3, 0);
        let mut vol = column_volume();
        vol.integrate(&d, None, &PoseSE3::identity(), &k).unwrap();
        // walk the central column and find the sign change
        let mut crossing = None;
        for kk in 0..40 {
            let (a, b) = (vol.sdf_at(2, 2, kk), vol.sdf_at(2, 2, kk + 1));
            if a > 0.0 && b <= 0.0 {
                let za = vol.voxel_center(2, 2, kk).z;
                crossing = Some(za + 0.5 * a as f64 / (a - b) as f64);
            }
        }
        let z = crossing.expect("surface crossing");
        assert!((z - 40.3).abs() < 0.25, "{z}");
    }

    #[test]
    fn repeated_frames_keep_values() {
        let k = Intrinsics::from_fov(60.0, 17, 17).unwrap();
        let (d, l) = plane_frame(&k, 40.0, 2);
        let mut once = column_volume();
        once.integrate(&d, Some(&l), &PoseSE3::identity(), &k).unwrap();
        let mut twice = once.clone();
        twice.integrate(&d, Some(&l), &PoseSE3::identity(), &k).unwrap();
        assert_eq!(once.sdf, twice.sdf);
        for (a, b) in once.weight.iter().zip(&twice.weight) {
            assert_eq!(*b, 2.0 * a);
        }
    }

    #[test]
    fn weight_saturates() {
        let k = Intrinsics::from_fov(60.0, 9, 9).unwrap();
        let (d, _) = plane_frame(&k, 40.0, 0);
        let mut vol = column_volume().with_max_weight(3.0);
        for _ in 0..5 {
            vol.integrate(&d, None, &PoseSE3::identity(), &k).unwrap();
        }
        assert!(vol.weight.iter().all(|w| *w == 0.0 || *w == 3.0));
    }

    #[test]
    fn far_behind_surface_untouched() {
        let k = Intrinsics::from_fov(60.0, 17, 17).unwrap();
        let (d, l) = plane_frame(&k, 35.0, 1);
        let mut vol = column_volume();
        vol.integrate(&d, Some(&l), &PoseSE3::identity(), &k).unwrap();
        for kk in 0..41 {
            let z = vol.voxel_center(2, 2, kk).z;
            let idx = vol.index(2, 2, kk);
            if 35.0 - z <= -2.0 {
                assert_eq!(vol.weight[idx], 0.0, "z={z}");
                assert_eq!(vol.labels[idx], [0; 4]);
            } else {
                assert!(vol.weight[idx] > 0.0, "z={z}");
            }
            let in_band = (35.0 - z).abs() < 2.0;
            assert_eq!(vol.labels[idx][Label::Cartilage as usize] > 0, in_band, "z={z}");
        }
    }

    #[test]
    fn mismatched_inputs() {
        let k = Intrinsics::from_fov(60.0, 9, 9).unwrap();
        let mut vol = column_volume();
        let d = DepthMap::filled(8, 9, 1.0).unwrap();
        assert!(vol.integrate(&d, None, &PoseSE3::identity(), &k).is_err());
        let d = DepthMap::filled(9, 9, 1.0).unwrap();
        let l = LabelMap::new(3, 3, vec![0; 9]).unwrap();
        assert!(vol.integrate(&d, Some(&l), &PoseSE3::identity(), &k).is_err());
        assert!(fuse_chunk(&FusionChunk::default(), &FusionParams::default(), &k).is_err());
    }

    #[test]
    fn chunk_of_one_equals_integrate() {
        let k = Intrinsics::from_fov(60.0, 17, 17).unwrap();
        let (d, l) = plane_frame(&k, 40.0, 3);
        let params = FusionParams {
            voxel_size: 0.5,
            truncation: 2.0,
            origin: Some([-1.0, -1.0, 30.0]),
            dims: Some([5, 5, 41]),
            ..Default::default()
        };
        let chunk = FusionChunk {
            frames: vec![FusionFrame {
                depth: d.clone(),
                labels: Some(l.clone()),
                pose: PoseSE3::identity(),
            }],
        };
        let fused = fuse_chunk(&chunk, &params, &k).unwrap();
        let mut direct = column_volume();
        direct.integrate(&d, Some(&l), &PoseSE3::identity(), &k).unwrap();
        assert_eq!(fused, direct);
    }

    #[test]
    fn auto_layout_covers_points() {
        let k = Intrinsics::from_fov(60.0, 9, 9).unwrap();
        let (d, _) = plane_frame(&k, 20.0, 0);
        let chunk = FusionChunk {
            frames: vec![FusionFrame {
                depth: d,
                labels: None,
                pose: PoseSE3::identity(),
            }],
        };
        let vol = fuse_chunk(&chunk, &FusionParams::default(), &k).unwrap();
        let o = vol.origin();
        let far = vol.voxel_center(vol.dims()[0] - 1, vol.dims()[1] - 1, vol.dims()[2] - 1);
        assert!(o[2] as f64 <= 20.0 - 16.0 && far.z >= 20.0 + 16.0);
        assert!(vol.observed_count() > 0);
    }
}
