use rayon::prelude::*;

use super::{check_same, LossConfig, PixelMap};
use crate::error::Result;
use crate::raster::ImageBuffer;

/// Mirror index into `[0, n)` without repeating the edge sample.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Sum of `src[reflect(center + k)]` for `k` in `-r..=r`, for every center.
/// Interior centers index directly; only the `r` samples at each end reflect.
#[inline]
fn window_sums(src: impl Fn(usize) -> f64, n: usize, r: usize, out: &mut [f64]) {
    let (ri, ni) = (r as isize, n as isize);
    for (c, o) in out.iter_mut().enumerate().take(n) {
        let mut s = 0.0;
        if c >= r && c + r < n {
            for i in c - r..=c + r {
                s += src(i);
            }
        } else {
            for k in -ri..=ri {
                s += src(reflect(c as isize + k, ni as usize));
            }
        }
        *o = s;
    }
}

/// Box-filtered local means of `field` (single channel), reflect-padded.
fn box_mean(field: &[f64], w: usize, h: usize, win: usize) -> Vec<f64> {
    let r = win / 2;
    let norm = 1.0 / (win * win) as f64;
    let mut horiz = vec![0.0; w * h];
    horiz.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        let src = &field[v * w..(v + 1) * w];
        window_sums(|i| src[i], w, r, row);
    });
    let mut out = vec![0.0; w * h];
    // vertical pass over whole rows so the inner loop runs along memory
    out.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        let rows: Vec<usize> = if v >= r && v + r < h {
            (v - r..=v + r).collect()
        } else {
            (-(r as isize)..=r as isize).map(|k| reflect(v as isize + k, h)).collect()
        };
        for y in rows {
            let src = &horiz[y * w..(y + 1) * w];
            for (o, s) in row.iter_mut().zip(src) {
                *o += s;
            }
        }
        for o in row.iter_mut() {
            *o *= norm;
        }
    });
    out
}

/// Per-pixel SSIM over a square box window (reflect padding), averaged over
/// channels and clamped to `[-1, 1]`. Symmetric in its arguments, and exactly
/// 1 for identical inputs.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, cfg: &LossConfig) -> Result<PixelMap> {
    check_same(a, b, "ssim")?;
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let win = cfg.ssim_window;
    let (c1, c2) = (cfg.ssim_c1, cfg.ssim_c2);
    let mut acc = vec![0.0; w * h];
    for c in 0..ch {
        let pa: Vec<f64> = a.data().iter().skip(c).step_by(ch).copied().collect();
        let pb: Vec<f64> = b.data().iter().skip(c).step_by(ch).copied().collect();
        let aa: Vec<f64> = pa.iter().map(|x| x * x).collect();
        let bb: Vec<f64> = pb.iter().map(|x| x * x).collect();
        let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let (mu_a, mu_b) = (box_mean(&pa, w, h, win), box_mean(&pb, w, h, win));
        let (e_aa, e_bb, e_ab) = (box_mean(&aa, w, h, win), box_mean(&bb, w, h, win), box_mean(&ab, w, h, win));
        for i in 0..w * h {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
            let den = ((ma * ma + mb * mb) + c1) * ((var_a + var_b) + c2);
            acc[i] += (num / den).clamp(-1.0, 1.0);
        }
    }
    let n = ch as f64;
    Ok(PixelMap {
        width: w,
        height: h,
        data: acc.into_iter().map(|s| s / n).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-3..8).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect(-1, 1), 0);
    }

    #[test]
    fn self_similarity_is_one() {
        let cfg = LossConfig::default();
        let a = ImageBuffer::from_fn(11, 9, 3, |u, v, c| ((u * 13 + v * 7 + c * 3) % 17) as f64 / 16.0).unwrap();
        let s = ssim(&a, &a, &cfg).unwrap();
        assert!(s.data.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn constant_images_match_scalar_formula() {
        let cfg = LossConfig::default();
        let (c1, c2) = (cfg.ssim_c1, cfg.ssim_c2);
        let expected = ((2.0 * 0.5 * 0.7 + c1) * c2) / ((0.25 + 0.49 + c1) * c2);
        let s = ssim(
            &ImageBuffer::filled(5, 4, 1, 0.5).unwrap(),
            &ImageBuffer::filled(5, 4, 1, 0.7).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!(s.data.iter().all(|v| (v - expected).abs() < 1e-12));
    }

    #[test]
    fn wider_window() {
        let cfg = LossConfig { ssim_window: 5, ..Default::default() };
        let a = ImageBuffer::from_fn(6, 6, 1, |u, v, _| ((u + 2 * v) % 5) as f64 / 4.0).unwrap();
        let b = ImageBuffer::from_fn(6, 6, 1, |u, v, _| ((2 * u + v) % 5) as f64 / 4.0).unwrap();
        let s = ssim(&a, &b, &cfg).unwrap();
        assert!(s.data.iter().all(|v| (-1.0..1.0).contains(v)));
    }
}
