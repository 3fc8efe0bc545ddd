use std::path::Path;

use super::TsdfVolume;
use crate::error::{Error, Result};

pub const VOLUME_MAGIC: &[u8; 4] = b"TSDF";
const HEADER_LEN: usize = 4 + 12 + 12 + 4 + 4;
const RECORD_LEN: usize = 16;

/// Little-endian snapshot: magic, dims, origin, voxel size, truncation, then
/// `(sdf, weight, counts[4])` per voxel, x fastest.
pub fn encode_volume(vol: &TsdfVolume) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * vol.len());
    out.extend_from_slice(VOLUME_MAGIC);
    for d in vol.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for o in vol.origin() {
        out.extend_from_slice(&o.to_le_bytes());
    }
    out.extend_from_slice(&vol.voxel_size().to_le_bytes());
    out.extend_from_slice(&vol.truncation().to_le_bytes());
    for ((s, w), c) in vol.sdf.iter().zip(&vol.weight).zip(&vol.labels) {
        out.extend_from_slice(&s.to_le_bytes());
        out.extend_from_slice(&w.to_le_bytes());
        for n in c {
            out.extend_from_slice(&n.to_le_bytes());
        }
    }
    out
}

fn f32_at(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

pub fn decode_volume(bytes: &[u8]) -> Result<TsdfVolume> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != VOLUME_MAGIC {
        return Err(Error::format("tsdf volume", "missing TSDF header"));
    }
    let dims = [0, 1, 2].map(|a| u32_at(bytes, 4 + 4 * a) as usize);
    let origin = [0, 1, 2].map(|a| f32_at(bytes, 16 + 4 * a));
    let voxel = f32_at(bytes, 28);
    let trunc = f32_at(bytes, 32);
    let mut vol = TsdfVolume::new(origin, voxel, dims, trunc).map_err(|e| Error::format("tsdf volume", e.to_string()))?;
    let expected = HEADER_LEN + RECORD_LEN * vol.len();
    if bytes.len() != expected {
        return Err(Error::format(
            "tsdf volume",
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    for (idx, rec) in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN).enumerate() {
        let s = f32_at(rec, 0);
        let w = f32_at(rec, 4);
        if !(s.abs() <= 1.0) || !(w >= 0.0) || !w.is_finite() {
            return Err(Error::format("tsdf volume", format!("voxel {idx} out of range")));
        }
        vol.sdf[idx] = s;
        vol.weight[idx] = w;
        vol.labels[idx] = [0, 1, 2, 3].map(|c| u16::from_le_bytes([rec[8 + 2 * c], rec[9 + 2 * c]]));
    }
    Ok(vol)
}

pub fn write_volume(path: impl AsRef<Path>, vol: &TsdfVolume) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_volume(vol)).map_err(|e| Error::io(path, e))
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<TsdfVolume> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_volume(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut vol = TsdfVolume::new([-1.5, 2.25, 30.0], 0.5, [3, 2, 4], 2.0).unwrap();
        vol.set_voxel(1, 1, 2, -0.123456, 7.0);
        vol.set_voxel(2, 0, 3, 0.987, 128.0);
        vol.set_label_counts(1, 1, 2, [1, 65535, 3, 0]);
        let bytes = encode_volume(&vol);
        assert_eq!(bytes.len(), 36 + 16 * 24);
        assert_eq!(&bytes[..4], b"TSDF");
        assert_eq!(&bytes[4..8], &3u32.to_le_bytes());
        let back = decode_volume(&bytes).unwrap();
        assert_eq!(back.sdf_values(), vol.sdf_values());
        assert_eq!(back.weights(), vol.weights());
        assert_eq!(back.label_counts(), vol.label_counts());
        assert_eq!(encode_volume(&back), bytes);
    }

    #[test]
    fn rejects_corrupt_files() {
        let vol = TsdfVolume::new([0.0; 3], 1.0, [2, 2, 2], 2.0).unwrap();
        let mut bytes = encode_volume(&vol);
        assert!(decode_volume(&bytes[..40]).is_err());
        bytes[0] = b'X';
        assert!(decode_volume(&bytes).is_err());
    }
}
