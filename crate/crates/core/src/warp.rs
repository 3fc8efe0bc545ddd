//! Inverse warping: rebuild the target view by sampling a source view.
//!
//! `pose_t_to_s` maps points from the target camera frame into the source
//! camera frame. For camera-to-world poses `T_t`, `T_s` this is
//! `T_s.relative(T_t)`, i.e. `T_s^-1 * T_t`. For the rectified stereo rig the
//! left-to-right transform is a translation by `-baseline` along x, so a point
//! at depth `z` lands `fx * baseline / z` pixels to the left in the right image.

use rayon::prelude::*;

use crate::camera::{Intrinsics, StereoRig};
use crate::error::{Error, Result};
use crate::pose::{PoseSE3, RigidMatrix};
use crate::raster::{DepthMap, ImageBuffer, MaskBuffer, SampleMode};

/// Synthesizes the target view from `source` (masked sampling).
pub fn synthesize_target(
    source: &ImageBuffer,
    target_depth: &DepthMap,
    pose_t_to_s: &PoseSE3,
    k: &Intrinsics,
) -> Result<(ImageBuffer, MaskBuffer)> {
    synthesize_target_with(source, target_depth, pose_t_to_s, k, SampleMode::Masked)
}

pub fn synthesize_target_with(
    source: &ImageBuffer,
    target_depth: &DepthMap,
    pose_t_to_s: &PoseSE3,
    k: &Intrinsics,
    mode: SampleMode,
) -> Result<(ImageBuffer, MaskBuffer)> {
    let (w, h) = (k.width, k.height);
    if source.width() != w || source.height() != h {
        return Err(Error::dims(format!(
            "source is {}x{}, intrinsics expect {}x{}",
            source.width(),
            source.height(),
            w,
            h
        )));
    }
    if target_depth.width() != w || target_depth.height() != h {
        return Err(Error::dims(format!(
            "depth is {}x{}, intrinsics expect {}x{}",
            target_depth.width(),
            target_depth.height(),
            w,
            h
        )));
    }
    let ch = source.channels();
    let tf = RigidMatrix::from(pose_t_to_s);
    let mut data = vec![0.0; w * h * ch];
    let mut mask = vec![false; w * h];

    data.par_chunks_mut(w * ch)
        .zip(mask.par_chunks_mut(w))
        .enumerate()
        .for_each(|(v, (row, mrow))| {
            for u in 0..w {
                let Some(d) = target_depth.valid(u, v) else {
                    continue;
                };
                let x = tf.apply(&k.backproject_unchecked(u as f64, v as f64, d));
                if !(x.z > 0.0) {
                    continue;
                }
                let (us, vs, _) = k.project_unchecked(&x);
                let (color, ok) = source.sample(us, vs, mode);
                if ok {
                    row[u * ch..(u + 1) * ch].copy_from_slice(&color[..ch]);
                    mrow[u] = true;
                }
            }
        });

    // bilinear blends of [0, 1] values stay in [0, 1] up to rounding
    for x in data.iter_mut() {
        *x = x.clamp(0.0, 1.0);
    }
    Ok((
        ImageBuffer::from_raw_unchecked(w, h, ch, data),
        MaskBuffer::new(w, h, mask)?,
    ))
}

/// Target-to-source transform for synthesizing the left view from the right.
pub fn stereo_pose(rig: &StereoRig) -> PoseSE3 {
    PoseSE3::from_translation(-rig.baseline, 0.0, 0.0)
}
