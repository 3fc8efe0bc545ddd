//! Per-pixel rasters: color images, metric depth, class labels and binary masks,
//! plus bilinear sampling and forward-difference gradients.
//!
//! All rasters are row-major; pixel `(u, v)` is column `u`, row `v`.

pub mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Color or gray image with intensities in `[0, 1]`, channels interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

/// How samples outside `[0, W-1] x [0, H-1]` are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Out-of-bounds samples are flagged invalid and read as zero.
    #[default]
    Masked,
    /// Coordinates are clamped to the border; samples are always valid.
    Clamped,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Domain(format!("images have 1 or 3 channels, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::dims(format!(
                "{}x{}x{} image needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image from a per-pixel function, clamping results to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for v in 0..height {
            for u in 0..width {
                for c in 0..channels {
                    data.push(f(u, v, c).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub(crate) fn from_raw_unchecked(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        ImageBuffer {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, c: usize) -> f64 {
        self.data[(v * self.width + u) * self.channels + c]
    }

    pub fn pixel(&self, u: usize, v: usize) -> &[f64] {
        let i = (v * self.width + u) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Bilinear interpolation at continuous coordinates `(u, v)`.
    ///
    /// Returns the interpolated color (unused channels zero) and whether the
    /// point lies inside `[0, W-1] x [0, H-1]`. Out-of-bounds samples read 0.
    #[inline]
    pub fn bilinear_sample(&self, u: f64, v: f64) -> ([f64; 3], bool) {
        self.sample(u, v, SampleMode::Masked)
    }

    #[inline]
    pub fn sample(&self, u: f64, v: f64, mode: SampleMode) -> ([f64; 3], bool) {
        let (wm, hm) = ((self.width - 1) as f64, (self.height - 1) as f64);
        let inside = u >= 0.0 && v >= 0.0 && u <= wm && v <= hm;
        let (u, v) = match (inside, mode) {
            (true, _) => (u, v),
            (false, SampleMode::Masked) => return ([0.0; 3], false),
            (false, SampleMode::Clamped) => {
                if !(u.is_finite() && v.is_finite()) {
                    return ([0.0; 3], false);
                }
                (u.clamp(0.0, wm), v.clamp(0.0, hm))
            }
        };
        let (x0, y0) = (u.floor() as usize, v.floor() as usize);
        let (fx, fy) = (u - x0 as f64, v - y0 as f64);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let a = self.get(x0, y0, c);
            let b = self.get(x1, y0, c);
            let d = self.get(x0, y1, c);
            let e = self.get(x1, y1, c);
            let top = a + (b - a) * fx;
            let bot = d + (e - d) * fx;
            *o = top + (bot - top) * fy;
        }
        (out, true)
    }

    /// Channel-averaged gray copy.
    pub fn to_gray(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.channels as f64;
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / n)
            .collect();
        ImageBuffer::from_raw_unchecked(self.width, self.height, 1, data)
    }
}

/// Metric depth in millimeters; 0 marks an invalid pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "{}x{} depth map needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::Domain(format!("invalid depth value {bad}")));
        }
        Ok(DepthMap {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::new(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    /// Depth at `(u, v)` if valid.
    #[inline]
    pub fn valid(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.get(u, v);
        (d > 0.0).then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| **d > 0.0).count()
    }

    pub fn mean_valid(&self) -> Option<f64> {
        let n = self.valid_count();
        (n > 0).then(|| self.data.iter().filter(|d| **d > 0.0).sum::<f64>() / n as f64)
    }

    /// Interpolated depth at continuous `(u, v)`. Bilinear when all four
    /// neighbors are valid and agree to within `max_step`, otherwise the
    /// nearest pixel. `None` when out of bounds or invalid.
    pub fn sample(&self, u: f64, v: f64, max_step: f64) -> Option<f64> {
        let (wm, hm) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(u >= -0.5 && v >= -0.5 && u < wm + 0.5 && v < hm + 0.5) {
            return None;
        }
        let (uc, vc) = (u.clamp(0.0, wm), v.clamp(0.0, hm));
        let (x0, y0) = (uc.floor() as usize, vc.floor() as usize);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let n = [self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1)];
        let lo = n.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = n.iter().cloned().fold(0.0, f64::max);
        if lo > 0.0 && hi - lo <= max_step {
            let (fx, fy) = (uc - x0 as f64, vc - y0 as f64);
            let top = n[0] + (n[1] - n[0]) * fx;
            let bot = n[2] + (n[3] - n[2]) * fx;
            return Some(top + (bot - top) * fy);
        }
        let (ur, vr) = (u.round().clamp(0.0, wm) as usize, v.round().clamp(0.0, hm) as usize);
        self.valid(ur, vr)
    }
}

/// Anatomical class of a pixel or voxel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    /// Background and other structures (fat, skin).
    Other = 0,
    /// Femoral and tibial cartilage.
    Cartilage = 1,
    Meniscus = 2,
    /// Anterior cruciate ligament.
    Acl = 3,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Other, Label::Cartilage, Label::Meniscus, Label::Acl];

    pub fn id(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(id: u8) -> Result<Self> {
        Label::ALL
            .get(id as usize)
            .copied()
            .ok_or(Error::UnknownLabel(id))
    }
}

/// Per-pixel class ids in `{0, 1, 2, 3}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "{}x{} label map needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|l| **l > 3) {
            return Err(Error::UnknownLabel(*bad));
        }
        Ok(LabelMap {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Label {
        // ids are validated at construction
        Label::ALL[self.data[v * self.width + u] as usize]
    }
}

/// Binary per-pixel mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskBuffer {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl MaskBuffer {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "{}x{} mask needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(MaskBuffer {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        MaskBuffer {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|m| **m).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.data.len().max(1) as f64
    }
}

/// Read access shared by the numeric rasters, for [`gradients`].
pub trait Raster {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn channels(&self) -> usize;
    fn values(&self) -> &[f64];
}

impl Raster for ImageBuffer {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn channels(&self) -> usize {
        self.channels
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
}

impl Raster for DepthMap {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn channels(&self) -> usize {
        1
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Forward differences, same layout as the input raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// `a[v][u+1] - a[v][u]`, zero in the last column.
    pub dx: Vec<f64>,
    /// `a[v+1][u] - a[v][u]`, zero in the last row.
    pub dy: Vec<f64>,
}

pub fn gradients<R: Raster + ?Sized>(raster: &R) -> Result<Gradients> {
    let (w, h, ch) = (raster.width(), raster.height(), raster.channels());
    if w < 2 || h < 2 {
        return Err(Error::DegenerateSize { width: w, height: h });
    }
    let a = raster.values();
    let mut dx = vec![0.0; a.len()];
    let mut dy = vec![0.0; a.len()];
    for v in 0..h {
        for u in 0..w {
            for c in 0..ch {
                let i = (v * w + u) * ch + c;
                if u + 1 < w {
                    dx[i] = a[i + ch] - a[i];
                }
                if v + 1 < h {
                    dy[i] = a[i + w * ch] - a[i];
                }
            }
        }
    }
    Ok(Gradients {
        width: w,
        height: h,
        channels: ch,
        dx,
        dy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, c: f64) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 1, |u, _, _| u as f64 * c).unwrap()
    }

    #[test]
    fn image_invariants() {
        assert!(ImageBuffer::new(2, 2, 1, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(ImageBuffer::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(ImageBuffer::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(DepthMap::new(1, 2, vec![1.0, -1.0]).is_err());
        assert!(DepthMap::new(1, 1, vec![f64::NAN]).is_err());
        assert!(matches!(LabelMap::new(1, 1, vec![4]), Err(Error::UnknownLabel(4))));
    }

    #[test]
    fn sampling_at_lattice_is_exact() {
        let img = ImageBuffer::from_fn(5, 4, 3, |u, v, c| ((u * 7 + v * 3 + c) % 11) as f64 / 10.0).unwrap();
        for v in 0..4 {
            for u in 0..5 {
                let (s, ok) = img.bilinear_sample(u as f64, v as f64);
                assert!(ok);
                assert_eq!(&s[..3], img.pixel(u, v));
            }
        }
    }

    #[test]
    fn sampling_midpoint_and_bounds() {
        let img = ImageBuffer::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(img.bilinear_sample(0.5, 0.0), ([0.5, 0.0, 0.0], true));
        assert_eq!(img.bilinear_sample(-0.5, 0.0), ([0.0; 3], false));
        assert_eq!(img.bilinear_sample(1.0001, 0.0).1, false);
        assert_eq!(img.sample(-0.5, 0.0, SampleMode::Clamped), ([0.0, 0.0, 0.0], true));
        assert_eq!(img.sample(7.0, 0.0, SampleMode::Clamped), ([1.0, 0.0, 0.0], true));
    }

    #[test]
    fn gradient_examples() {
        let g = gradients(&ImageBuffer::filled(4, 3, 3, 0.3).unwrap()).unwrap();
        assert!(g.dx.iter().chain(&g.dy).all(|v| *v == 0.0));

        let g = gradients(&ramp(6, 3, 0.125)).unwrap();
        for v in 0..3 {
            for u in 0..6 {
                assert_eq!(g.dx[v * 6 + u], if u < 5 { 0.125 } else { 0.0 });
                assert_eq!(g.dy[v * 6 + u], 0.0);
            }
        }

        let g = gradients(&ImageBuffer::new(2, 2, 1, vec![0.0, 1.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(g.dx, vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(g.dy, vec![0.0; 4]);

        assert!(matches!(
            gradients(&DepthMap::filled(1, 5, 1.0).unwrap()),
            Err(Error::DegenerateSize { .. })
        ));
    }

    #[test]
    fn depth_sampling() {
        let d = DepthMap::new(2, 2, vec![10.0, 12.0, 10.0, 12.0]).unwrap();
        assert_eq!(d.sample(0.5, 0.5, 5.0), Some(11.0));
        // discontinuity falls back to nearest
        assert_eq!(d.sample(0.4, 0.5, 1.0), Some(10.0));
        assert_eq!(d.sample(-1.0, 0.0, 5.0), None);
        let holes = DepthMap::new(2, 1, vec![0.0, 12.0]).unwrap();
        assert_eq!(holes.sample(0.2, 0.0, 5.0), None);
        assert_eq!(holes.sample(0.7, 0.0, 5.0), Some(12.0));
    }

    #[test]
    fn label_ids() {
        for l in Label::ALL {
            assert_eq!(Label::try_from(l.id()).unwrap(), l);
        }
        assert!(Label::try_from(7).is_err());
    }
}
