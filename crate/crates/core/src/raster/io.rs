//! Raster file formats.
//!
//! * Images: 8-bit PNG, gray or RGB.
//! * Depth: 16-bit gray PNG holding `round(mm * 10)` (0.1 mm steps, max
//!   6553.5 mm, 0 = invalid), or a raw little-endian raster: magic `DPTH`,
//!   `u32` width, `u32` height, `u32` reserved (0), then row-major `f32` mm.
//! * Labels: 8-bit indexed PNG whose indices are the class ids; the palette
//!   carries the class display colors.

use std::io::Cursor;
use std::path::Path;

use super::{DepthMap, ImageBuffer, LabelMap};
use crate::error::{Error, Result};
use crate::mesh::palette_u8;
use crate::raster::Label;

pub const DEPTH_PNG_SCALE: f64 = 10.0;
pub const DEPTH_RAW_MAGIC: &[u8; 4] = b"DPTH";

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::format("PNG", e.to_string())
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    palette: Option<Vec<u8>>,
    bytes: &[u8],
) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        if let Some(p) = palette {
            enc.set_palette(p);
        }
        let mut w = enc.write_header().map_err(png_err)?;
        w.write_image_data(bytes).map_err(png_err)?;
        w.finish().map_err(png_err)?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Decoded {
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    bytes: Vec<u8>,
}

fn read_png(path: &Path) -> Result<Decoded> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = png::Decoder::new(Cursor::new(raw)).read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format("PNG", "image too large"))?;
    let mut bytes = vec![0; size];
    let info = reader.next_frame(&mut bytes).map_err(png_err)?;
    bytes.truncate(info.buffer_size());
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        bytes,
    })
}

/// Writes an image as 8-bit PNG (`round(v * 255)`).
pub fn write_image_png(path: &Path, img: &ImageBuffer) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().map(|v| (v * 255.0).round() as u8).collect();
    let color = if img.channels() == 3 {
        png::ColorType::Rgb
    } else {
        png::ColorType::Grayscale
    };
    write_png(path, img.width(), img.height(), color, png::BitDepth::Eight, None, &bytes)
}

pub fn read_image_png(path: &Path) -> Result<ImageBuffer> {
    let d = read_png(path)?;
    if d.depth != png::BitDepth::Eight {
        return Err(Error::format("image PNG", format!("expected 8-bit samples, got {:?}", d.depth)));
    }
    let channels = match d.color {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(Error::format("image PNG", format!("unsupported color type {other:?}"))),
    };
    let data = d.bytes.iter().map(|b| *b as f64 / 255.0).collect();
    ImageBuffer::new(d.width, d.height, channels, data)
}

/// Writes depth as 16-bit PNG in tenths of a millimeter.
pub fn write_depth_png(path: &Path, depth: &DepthMap) -> Result<()> {
    let max = u16::MAX as f64 / DEPTH_PNG_SCALE;
    let mut bytes = Vec::with_capacity(depth.data().len() * 2);
    for &d in depth.data() {
        if d > max {
            return Err(Error::Domain(format!("depth {d} mm exceeds the 16-bit PNG range ({max} mm)")));
        }
        let q = (d * DEPTH_PNG_SCALE).round() as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    write_png(
        path,
        depth.width(),
        depth.height(),
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        None,
        &bytes,
    )
}

pub fn read_depth_png(path: &Path) -> Result<DepthMap> {
    let d = read_png(path)?;
    if d.depth != png::BitDepth::Sixteen || d.color != png::ColorType::Grayscale {
        return Err(Error::format("depth PNG", "expected 16-bit single-channel samples"));
    }
    let data = d
        .bytes
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / DEPTH_PNG_SCALE)
        .collect();
    DepthMap::new(d.width, d.height, data)
}

pub fn encode_depth_raw(depth: &DepthMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + depth.data().len() * 4);
    out.extend_from_slice(DEPTH_RAW_MAGIC);
    out.extend_from_slice(&(depth.width() as u32).to_le_bytes());
    out.extend_from_slice(&(depth.height() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for &d in depth.data() {
        out.extend_from_slice(&(d as f32).to_le_bytes());
    }
    out
}

pub fn decode_depth_raw(bytes: &[u8]) -> Result<DepthMap> {
    if bytes.len() < 16 || &bytes[..4] != DEPTH_RAW_MAGIC {
        return Err(Error::format("raw depth", "missing DPTH header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h) = (word(4), word(8));
    let body = &bytes[16..];
    if body.len() != w * h * 4 {
        return Err(Error::format(
            "raw depth",
            format!("{}x{} raster needs {} bytes, found {}", w, h, w * h * 4, body.len()),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    DepthMap::new(w, h, data)
}

pub fn write_depth_raw(path: &Path, depth: &DepthMap) -> Result<()> {
    std::fs::write(path, encode_depth_raw(depth)).map_err(|e| Error::io(path, e))
}

pub fn read_depth_raw(path: &Path) -> Result<DepthMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_depth_raw(&bytes)
}

/// Reads either depth format, chosen by extension (`.png` or anything else as raw).
pub fn read_depth(path: &Path) -> Result<DepthMap> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("png") => read_depth_png(path),
        _ => read_depth_raw(path),
    }
}

pub fn write_label_png(path: &Path, labels: &LabelMap) -> Result<()> {
    let palette: Vec<u8> = Label::ALL.iter().flat_map(|l| palette_u8(*l)).collect();
    write_png(
        path,
        labels.width(),
        labels.height(),
        png::ColorType::Indexed,
        png::BitDepth::Eight,
        Some(palette),
        labels.data(),
    )
}

pub fn read_label_png(path: &Path) -> Result<LabelMap> {
    let d = read_png(path)?;
    let ok = matches!(d.color, png::ColorType::Indexed | png::ColorType::Grayscale);
    if !ok || d.depth != png::BitDepth::Eight {
        return Err(Error::format("label PNG", "expected 8-bit indexed samples"));
    }
    LabelMap::new(d.width, d.height, d.bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for channels in [1, 3] {
            let img = ImageBuffer::from_fn(7, 5, channels, |u, v, c| ((u * 31 + v * 17 + c * 5) % 256) as f64 / 255.0)
                .unwrap();
            let p = dir.path().join(format!("img{channels}.png"));
            write_image_png(&p, &img).unwrap();
            let back = read_image_png(&p).unwrap();
            assert_eq!(back.channels(), channels);
            for (a, b) in img.data().iter().zip(back.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn depth_png_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let depth = DepthMap::new(3, 1, vec![0.0, 12.34, 6553.5]).unwrap();
        let p = dir.path().join("d.png");
        write_depth_png(&p, &depth).unwrap();
        let back = read_depth_png(&p).unwrap();
        assert_eq!(back.data(), &[0.0, 12.3, 6553.5]);
        let too_far = DepthMap::new(1, 1, vec![7000.0]).unwrap();
        assert!(write_depth_png(&p, &too_far).is_err());
    }

    #[test]
    fn raw_depth_layout() {
        let depth = DepthMap::new(2, 1, vec![1.5, 0.0]).unwrap();
        let bytes = encode_depth_raw(&depth);
        assert_eq!(&bytes[..4], b"DPTH");
        assert_eq!(&bytes[4..16], &[2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.5f32.to_le_bytes());
        assert_eq!(decode_depth_raw(&bytes).unwrap(), depth);
        assert!(decode_depth_raw(&bytes[..18]).is_err());
        assert!(decode_depth_raw(b"NOPE0000000000000000").is_err());
    }

    #[test]
    fn label_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let labels = LabelMap::new(4, 2, vec![0, 1, 2, 3, 3, 2, 1, 0]).unwrap();
        let p = dir.path().join("l.png");
        write_label_png(&p, &labels).unwrap();
        assert_eq!(read_label_png(&p).unwrap(), labels);
    }
}
