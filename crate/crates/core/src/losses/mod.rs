//! View-synthesis and pose-supervision objectives.
//!
//! * photometric: `alpha * (1 - SSIM) / 2 + (1 - alpha) * |I_t - I_hat|`
//! * minimum reprojection across source views
//! * auto-mask: keep pixels whose warped error beats the raw (unwarped) error
//! * edge-aware depth smoothness
//! * pose supervision on raw and unit-normalized translation/rotation
//!
//! Per-pixel stages return rasters; reductions skip invalid pixels rather than
//! averaging zeros in.

mod pose_loss;
mod ssim;

pub use pose_loss::{pose_loss, PoseLossBreakdown};
pub use ssim::ssim;

use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::pose::PoseSE3;
use crate::raster::{gradients, DepthMap, ImageBuffer, MaskBuffer, SampleMode};
use crate::warp::synthesize_target_with;

/// Weights and constants of the objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// SSIM vs. L1 mixing weight.
    pub alpha: f64,
    pub lambda_smoo: f64,
    pub ssim_c1: f64,
    pub ssim_c2: f64,
    /// Odd box-window size for SSIM statistics.
    pub ssim_window: usize,
    /// Per-axis weights on the translation terms of the pose loss.
    pub trl_weights: [f64; 3],
    /// Below this norm a normalized pose term is skipped.
    pub norm_epsilon: f64,
    pub automask: bool,
    /// Apply smoothness to mean-normalized inverse depth instead of depth.
    pub smooth_disparity: bool,
    pub sample_mode: SampleMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.85,
            lambda_smoo: 1e-3,
            ssim_c1: 0.01 * 0.01,
            ssim_c2: 0.03 * 0.03,
            ssim_window: 3,
            trl_weights: [0.5, 0.5, 1.0],
            norm_epsilon: 1e-8,
            automask: true,
            smooth_disparity: false,
            sample_mode: SampleMode::Masked,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.lambda_smoo >= 0.0) {
            return Err(Error::Domain("lambda_smoo must be non-negative".into()));
        }
        if self.ssim_window < 3 || self.ssim_window % 2 == 0 {
            return Err(Error::Domain(format!(
                "ssim_window must be odd and at least 3, got {}",
                self.ssim_window
            )));
        }
        if !(self.ssim_c1 > 0.0 && self.ssim_c2 > 0.0) {
            return Err(Error::Domain("SSIM constants must be positive".into()));
        }
        if self.trl_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Domain("translation weights must be positive".into()));
        }
        if !(self.norm_epsilon >= 0.0) {
            return Err(Error::Domain("norm_epsilon must be non-negative".into()));
        }
        Ok(())
    }
}

/// Single-channel per-pixel values (losses, SSIM).
#[derive(Clone, Debug, PartialEq)]
pub struct PixelMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl PixelMap {
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }
}

fn check_same(a: &ImageBuffer, b: &ImageBuffer, what: &str) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::dims(format!(
            "{what}: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

/// Per-pixel photometric error, channel-averaged.
pub fn photometric(target: &ImageBuffer, synth: &ImageBuffer, cfg: &LossConfig) -> Result<PixelMap> {
    check_same(target, synth, "photometric")?;
    let s = ssim(target, synth, cfg)?;
    let ch = target.channels();
    let (t, y) = (target.data(), synth.data());
    let data = s
        .data
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let l1 = (0..ch).map(|c| (t[i * ch + c] - y[i * ch + c]).abs()).sum::<f64>() / ch as f64;
            let dssim = ((1.0 - s) * 0.5).clamp(0.0, 1.0);
            cfg.alpha * dssim + (1.0 - cfg.alpha) * l1
        })
        .collect();
    Ok(PixelMap {
        width: target.width(),
        height: target.height(),
        data,
    })
}

/// Per-pixel minimum over source views.
#[derive(Clone, Debug, PartialEq)]
pub struct MinReprojection {
    /// Minimum error; 0 where no source is valid.
    pub loss: PixelMap,
    /// Index of the winning source.
    pub argmin: Vec<Option<usize>>,
    /// Pixels valid in at least one source.
    pub valid: MaskBuffer,
}

impl MinReprojection {
    /// Mean loss over valid pixels that `keep` also admits.
    pub fn masked_mean(&self, keep: Option<&MaskBuffer>) -> (f64, usize) {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, l) in self.loss.data.iter().enumerate() {
            if self.valid.data()[i] && keep.is_none_or(|m| m.data()[i]) {
                sum += l;
                n += 1;
            }
        }
        if n == 0 {
            (0.0, 0)
        } else {
            (sum / n as f64, n)
        }
    }
}

fn min_over(
    target: &ImageBuffer,
    views: &[(&ImageBuffer, Option<&MaskBuffer>)],
    cfg: &LossConfig,
) -> Result<MinReprojection> {
    let (w, h) = (target.width(), target.height());
    let mut best = vec![f64::INFINITY; w * h];
    let mut argmin = vec![None; w * h];
    for (k, (img, mask)) in views.iter().enumerate() {
        if let Some(m) = mask {
            if m.width() != w || m.height() != h {
                return Err(Error::dims("mask does not match target"));
            }
        }
        let p = photometric(target, img, cfg)?;
        for i in 0..w * h {
            if mask.is_some_and(|m| !m.data()[i]) {
                continue;
            }
            if p.data[i] < best[i] {
                best[i] = p.data[i];
                argmin[i] = Some(k);
            }
        }
    }
    let valid: Vec<bool> = argmin.iter().map(Option::is_some).collect();
    for (b, ok) in best.iter_mut().zip(&valid) {
        if !ok {
            *b = 0.0;
        }
    }
    Ok(MinReprojection {
        loss: PixelMap {
            width: w,
            height: h,
            data: best,
        },
        argmin,
        valid: MaskBuffer::new(w, h, valid)?,
    })
}

/// Minimum photometric error over synthesized sources, honoring their validity masks.
pub fn min_reprojection(
    target: &ImageBuffer,
    synths: &[(ImageBuffer, MaskBuffer)],
    cfg: &LossConfig,
) -> Result<MinReprojection> {
    if synths.is_empty() {
        return Err(Error::Empty("synthesized sources"));
    }
    let views: Vec<_> = synths.iter().map(|(i, m)| (i, Some(m))).collect();
    min_over(target, &views, cfg)
}

/// Keeps pixels whose best warped error is strictly below the best error
/// against the raw, unwarped sources. Static content fails the test.
pub fn automask(
    target: &ImageBuffer,
    raw_sources: &[ImageBuffer],
    synths: &[(ImageBuffer, MaskBuffer)],
    cfg: &LossConfig,
) -> Result<MaskBuffer> {
    if raw_sources.is_empty() {
        return Err(Error::Empty("raw sources"));
    }
    let warped = min_reprojection(target, synths, cfg)?;
    automask_from(target, raw_sources, &warped, cfg)
}

fn automask_from(
    target: &ImageBuffer,
    raw_sources: &[ImageBuffer],
    warped: &MinReprojection,
    cfg: &LossConfig,
) -> Result<MaskBuffer> {
    let views: Vec<_> = raw_sources.iter().map(|i| (i, None)).collect();
    let raw = min_over(target, &views, cfg)?;
    let keep = (0..raw.loss.data.len())
        .map(|i| warped.valid.data()[i] && raw.loss.data[i] > warped.loss.data[i])
        .collect();
    MaskBuffer::new(target.width(), target.height(), keep)
}

/// Edge-aware smoothness of `depth`, attenuated by the guide image's gradients.
///
/// Each direction is averaged over the pixel pairs whose two depths are
/// valid; the result is the sum of the two directional means.
pub fn smoothness(depth: &DepthMap, guide: &ImageBuffer) -> Result<f64> {
    smoothness_with(depth, guide, false)
}

pub fn smoothness_with(depth: &DepthMap, guide: &ImageBuffer, disparity: bool) -> Result<f64> {
    let (w, h) = (depth.width(), depth.height());
    if guide.width() != w || guide.height() != h {
        return Err(Error::dims(format!(
            "depth {}x{} vs guide {}x{}",
            w,
            h,
            guide.width(),
            guide.height()
        )));
    }
    let field: DepthMap = if disparity {
        let mean_disp = {
            let valid: Vec<f64> = depth.data().iter().filter(|d| **d > 0.0).map(|d| 1.0 / d).collect();
            if valid.is_empty() {
                return Ok(0.0);
            }
            valid.iter().sum::<f64>() / valid.len() as f64
        };
        let data = depth
            .data()
            .iter()
            .map(|d| if *d > 0.0 { 1.0 / d / mean_disp } else { 0.0 })
            .collect();
        DepthMap::new(w, h, data)?
    } else {
        depth.clone()
    };
    let gd = gradients(&field)?;
    let gi = gradients(guide)?;
    let ch = guide.channels();
    let img_grad = |g: &[f64], i: usize| (0..ch).map(|c| g[i * ch + c].abs()).sum::<f64>() / ch as f64;

    let (mut sx, mut nx, mut sy, mut ny) = (0.0, 0usize, 0.0, 0usize);
    let d = field.data();
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if d[i] <= 0.0 {
                continue;
            }
            if u + 1 < w && d[i + 1] > 0.0 {
                sx += gd.dx[i].abs() * (-img_grad(&gi.dx, i)).exp();
                nx += 1;
            }
            if v + 1 < h && d[i + w] > 0.0 {
                sy += gd.dy[i].abs() * (-img_grad(&gi.dy, i)).exp();
                ny += 1;
            }
        }
    }
    let mx = if nx > 0 { sx / nx as f64 } else { 0.0 };
    let my = if ny > 0 { sy / ny as f64 } else { 0.0 };
    Ok(mx + my)
}

/// Breakdown of the self-supervised objective.
#[derive(Clone, Debug)]
pub struct SelfSupervisedDiagnostics {
    /// Masked mean of the minimum reprojection error.
    pub photometric: f64,
    /// Unweighted smoothness.
    pub smoothness: f64,
    pub lambda_smoo: f64,
    pub total: f64,
    /// Pixels contributing to the photometric mean.
    pub surviving_pixels: usize,
    pub min_reprojection: MinReprojection,
    pub automask: MaskBuffer,
    pub synth_masks: Vec<MaskBuffer>,
}

/// Self-supervised objective: warp every source into the target, take the
/// auto-masked minimum reprojection error, add weighted smoothness.
///
/// `poses[i]` is the target-to-source transform for `raw_sources[i]`.
pub fn self_supervised_loss(
    target: &ImageBuffer,
    raw_sources: &[ImageBuffer],
    depth: &DepthMap,
    poses: &[PoseSE3],
    k: &Intrinsics,
    cfg: &LossConfig,
) -> Result<(f64, SelfSupervisedDiagnostics)> {
    if raw_sources.is_empty() {
        return Err(Error::Empty("source images"));
    }
    if poses.len() != raw_sources.len() {
        return Err(Error::LengthMismatch {
            expected: raw_sources.len(),
            actual: poses.len(),
        });
    }
    for s in raw_sources {
        check_same(target, s, "source vs target")?;
    }
    let synths = raw_sources
        .iter()
        .zip(poses)
        .map(|(src, pose)| synthesize_target_with(src, depth, pose, k, cfg.sample_mode))
        .collect::<Result<Vec<_>>>()?;
    let warped = min_reprojection(target, &synths, cfg)?;
    let mask = if cfg.automask {
        automask_from(target, raw_sources, &warped, cfg)?
    } else {
        warped.valid.clone()
    };
    let (photo, surviving) = warped.masked_mean(Some(&mask));
    let smooth = if cfg.lambda_smoo > 0.0 {
        smoothness_with(depth, target, cfg.smooth_disparity)?
    } else {
        0.0
    };
    let total = photo + cfg.lambda_smoo * smooth;
    let diag = SelfSupervisedDiagnostics {
        photometric: photo,
        smoothness: smooth,
        lambda_smoo: cfg.lambda_smoo,
        total,
        surviving_pixels: surviving,
        min_reprojection: warped,
        automask: mask,
        synth_masks: synths.into_iter().map(|(_, m)| m).collect(),
    };
    Ok((total, diag))
}

/// Ground-truth and predicted target-to-next-frame motion for pose supervision.
#[derive(Clone, Copy, Debug)]
pub struct PoseSupervision {
    pub gt: PoseSE3,
    pub pred: PoseSE3,
}

#[derive(Clone, Debug)]
pub struct TotalLoss {
    pub total: f64,
    pub self_supervised: f64,
    pub pose: Option<PoseLossBreakdown>,
    pub diagnostics: SelfSupervisedDiagnostics,
}

/// Self-supervised objective plus optional pose supervision.
pub fn total_loss(
    target: &ImageBuffer,
    raw_sources: &[ImageBuffer],
    depth: &DepthMap,
    poses: &[PoseSE3],
    k: &Intrinsics,
    supervision: Option<&PoseSupervision>,
    cfg: &LossConfig,
) -> Result<TotalLoss> {
    let (self_sup, diagnostics) = self_supervised_loss(target, raw_sources, depth, poses, k, cfg)?;
    let pose = supervision.map(|s| pose_loss(&s.gt, &s.pred, cfg).1);
    let total = self_sup + pose.as_ref().map_or(0.0, |p| p.total);
    Ok(TotalLoss {
        total,
        self_supervised: self_sup,
        pose,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize, seed: u64) -> ImageBuffer {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ImageBuffer::from_fn(w, h, 3, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        let bad = [
            LossConfig { alpha: 1.5, ..Default::default() },
            LossConfig { ssim_window: 4, ..Default::default() },
            LossConfig { lambda_smoo: -1.0, ..Default::default() },
            LossConfig { trl_weights: [0.5, 0.0, 1.0], ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn photometric_identity_and_l1() {
        let cfg = LossConfig::default();
        let a = noise(9, 7, 1);
        assert!(photometric(&a, &a, &cfg).unwrap().data.iter().all(|v| *v == 0.0));

        let l1 = LossConfig { alpha: 0.0, ..Default::default() };
        let p = photometric(
            &ImageBuffer::filled(5, 5, 3, 0.2).unwrap(),
            &ImageBuffer::filled(5, 5, 3, 0.5).unwrap(),
            &l1,
        )
        .unwrap();
        assert!(p.data.iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn photometric_constant_images_mixes_ssim() {
        let cfg = LossConfig::default();
        let (c1, c2) = (cfg.ssim_c1, cfg.ssim_c2);
        // Scalar SSIM on flat patches: variances and covariance vanish.
        let s = ((2.0 * 0.2 * 0.5 + c1) * c2) / ((0.2f64 * 0.2 + 0.5 * 0.5 + c1) * c2);
        let expected = 0.85 * (1.0 - s) / 2.0 + 0.15 * 0.3;
        let p = photometric(
            &ImageBuffer::filled(6, 6, 1, 0.2).unwrap(),
            &ImageBuffer::filled(6, 6, 1, 0.5).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!(p.data.iter().all(|v| (v - expected).abs() < 1e-12), "{} vs {expected}", p.data[0]);
    }

    #[test]
    fn min_reprojection_picks_exact_copy() {
        let cfg = LossConfig::default();
        let t = noise(10, 8, 2);
        let other = noise(10, 8, 3);
        let mut m = vec![true; 80];
        m[5] = false;
        let a = (t.clone(), MaskBuffer::new(10, 8, m).unwrap());
        let b = (other.clone(), MaskBuffer::filled(10, 8, true));
        let r = min_reprojection(&t, &[a, b], &cfg).unwrap();
        for i in 0..80 {
            if i == 5 {
                assert_eq!(r.argmin[i], Some(1));
            } else {
                assert_eq!(r.loss.data[i], 0.0);
                assert_eq!(r.argmin[i], Some(0));
            }
        }
        assert!(matches!(min_reprojection(&t, &[], &cfg), Err(Error::Empty(_))));
    }

    #[test]
    fn min_reprojection_invalid_everywhere() {
        let cfg = LossConfig::default();
        let t = noise(6, 6, 4);
        let r = min_reprojection(&t, &[(noise(6, 6, 5), MaskBuffer::filled(6, 6, false))], &cfg).unwrap();
        assert_eq!(r.valid.count(), 0);
        assert!(r.loss.data.iter().all(|v| *v == 0.0));
        assert_eq!(r.masked_mean(None), (0.0, 0));
    }

    #[test]
    fn automask_static_and_moving() {
        let cfg = LossConfig::default();
        let t = noise(8, 8, 6);
        let all = MaskBuffer::filled(8, 8, true);
        let m = automask(&t, &[t.clone()], &[(t.clone(), all.clone())], &cfg).unwrap();
        assert_eq!(m.count(), 0);
        let m = automask(&t, &[noise(8, 8, 7)], &[(t.clone(), all)], &cfg).unwrap();
        assert_eq!(m.count(), 64);
        assert!(automask(&t, &[], &[], &cfg).is_err());
    }

    #[test]
    fn smoothness_cases() {
        let flat_guide = ImageBuffer::filled(8, 6, 3, 0.4).unwrap();
        assert_eq!(smoothness(&DepthMap::filled(8, 6, 33.0).unwrap(), &flat_guide).unwrap(), 0.0);

        let c = 0.75;
        let ramp = DepthMap::new(8, 6, (0..48).map(|i| 10.0 + c * (i % 8) as f64).collect()).unwrap();
        let s_flat = smoothness(&ramp, &flat_guide).unwrap();
        assert!((s_flat - c).abs() < 1e-12);

        let edges = ImageBuffer::from_fn(8, 6, 3, |u, _, _| if u % 2 == 0 { 0.0 } else { 1.0 }).unwrap();
        assert!(smoothness(&ramp, &edges).unwrap() < s_flat);

        assert!(smoothness(&ramp, &ImageBuffer::filled(7, 6, 1, 0.0).unwrap()).is_err());
    }

    #[test]
    fn smoothness_ignores_invalid_pairs() {
        let guide = ImageBuffer::filled(4, 2, 1, 0.5).unwrap();
        let depth = DepthMap::new(4, 2, vec![1.0, 2.0, 0.0, 9.0, 1.0, 2.0, 0.0, 9.0]).unwrap();
        // only the (0,1) horizontal pairs survive; vertical pairs have zero difference
        let s = smoothness(&depth, &guide).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
