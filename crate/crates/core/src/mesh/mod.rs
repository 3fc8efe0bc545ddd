//! Zero-level-set extraction with per-vertex anatomical labels, and PLY I/O.

mod ply;
mod table;

pub use ply::{decode_ply, encode_ply, read_ply, write_ply, PlyFormat};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::raster::Label;
use crate::tsdf::TsdfVolume;

/// Display color of a class: cartilage green, meniscus red, ACL blue, other cyan.
pub fn palette(label: u8) -> Result<[f32; 3]> {
    let label = Label::try_from(label)?;
    Ok(match label {
        Label::Other => [0.0, 1.0, 1.0],
        Label::Cartilage => [0.0, 1.0, 0.0],
        Label::Meniscus => [1.0, 0.0, 0.0],
        Label::Acl => [0.0, 0.0, 1.0],
    })
}

pub fn palette_u8(label: Label) -> [u8; 3] {
    palette(label.id()).expect("valid label").map(|c| (c * 255.0).round() as u8)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f32; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub colors: Vec<[f32; 3]>,
    pub labels: Vec<u8>,
}

impl Mesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.colors.len() != n || self.labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: self.colors.len().min(self.labels.len()),
            });
        }
        if self.vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite vertex".into()));
        }
        if self.triangles.iter().flatten().any(|i| *i as usize >= n) {
            return Err(Error::Domain("triangle index out of range".into()));
        }
        for l in &self.labels {
            Label::try_from(*l)?;
        }
        Ok(())
    }

    /// Undirected edge use counts.
    pub fn edge_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for n in 0..3 {
                let (a, b) = (t[n], t[(n + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// True when every edge borders exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.edge_counts().values().all(|c| *c == 2)
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    pub fn triangle_normal(&self, t: usize) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize].map(|x| x as f64));
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
    }
}

/// Extracts the `iso` level set. Cells with any unobserved corner are skipped.
/// Vertices are shared along grid edges and emitted in scan order, so the
/// output is deterministic.
pub fn marching_cubes(vol: &TsdfVolume, iso: f32) -> Mesh {
    let [nx, ny, nz] = vol.dims();
    let mut mesh = Mesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return mesh;
    }
    let sdf = vol.sdf_values();
    let weight = vol.weights();
    let strides = [1, nx, nx * ny];
    let mut cache: HashMap<(usize, usize), u32> = HashMap::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let base = vol.index(i, j, k);
                let corners = [0, 1, 2, 3, 4, 5, 6, 7].map(|c| {
                    base + (c & 1) * strides[0] + (c >> 1 & 1) * strides[1] + (c >> 2 & 1) * strides[2]
                });
                if corners.iter().any(|c| weight[*c] <= 0.0) {
                    continue;
                }
                let case = corners
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (n, c)| if sdf[*c] < iso { acc | 1 << n } else { acc });
                for tri in table::case_triangles(case) {
                    let ids = tri.map(|e| {
                        let (a, b, axis) = table::EDGES[e as usize];
                        let (ia, ib) = (corners[a], corners[b]);
                        *cache.entry((ia, axis)).or_insert_with(|| {
                            push_vertex(&mut mesh, vol, ia, ib, iso, axis, strides)
                        })
                    });
                    mesh.triangles.push(ids);
                }
            }
        }
    }
    mesh
}

fn push_vertex(mesh: &mut Mesh, vol: &TsdfVolume, ia: usize, ib: usize, iso: f32, axis: usize, strides: [usize; 3]) -> u32 {
    let sdf = vol.sdf_values();
    let (va, vb) = (sdf[ia] as f64, sdf[ib] as f64);
    let t = if va == vb { 0.5 } else { ((iso as f64 - va) / (vb - va)).clamp(0.0, 1.0) };
    let [nx, ny, _] = vol.dims();
    let (i, j, k) = (ia % nx, ia / strides[1] % ny, ia / strides[2]);
    let mut p = vol.voxel_center(i, j, k);
    p[axis] += t * vol.voxel_size() as f64;
    let (near, far) = if t <= 0.5 { (ia, ib) } else { (ib, ia) };
    let label = vol
        .voxel_label(near)
        .or_else(|| vol.voxel_label(far))
        .unwrap_or(Label::Other);
    mesh.vertices.push([p.x as f32, p.y as f32, p.z as f32]);
    mesh.colors.push(palette(label.id()).expect("valid label"));
    mesh.labels.push(label.id());
    (mesh.vertices.len() - 1) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic_volume(n: usize, f: impl Fn([f32; 3]) -> f32) -> TsdfVolume {
        let mut vol = TsdfVolume::new([0.0; 3], 1.0, [n, n, n], 3.0).unwrap();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let d = f([i as f32, j as f32, k as f32]);
                    vol.set_voxel(i, j, k, (d / 3.0).clamp(-1.0, 1.0), 1.0);
                }
            }
        }
        vol
    }

    #[test]
    fn palette_colors() {
        assert_eq!(palette(1).unwrap(), [0.0, 1.0, 0.0]);
        assert_eq!(palette(2).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(palette(3).unwrap(), [0.0, 0.0, 1.0]);
        assert_eq!(palette(0).unwrap(), [0.0, 1.0, 1.0]);
        assert!(matches!(palette(7), Err(Error::UnknownLabel(7))));
        assert_eq!(palette_u8(Label::Other), [0, 255, 255]);
    }

    #[test]
    fn all_positive_gives_empty_mesh() {
        let vol = analytic_volume(6, |_| 2.0);
        let m = marching_cubes(&vol, 0.0);
        assert!(m.is_empty() && m.vertices.is_empty());
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let c = 8.3f32;
        let r = 5.2f32;
        let vol = analytic_volume(18, |p| {
            ((p[0] - c).powi(2) + (p[1] - c).powi(2) + (p[2] - c).powi(2)).sqrt() - r
        });
        let m = marching_cubes(&vol, 0.0);
        m.validate().unwrap();
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        for v in &m.vertices {
            let rad = ((v[0] - c).powi(2) + (v[1] - c).powi(2) + (v[2] - c).powi(2)).sqrt();
            assert!((rad - r).abs() < 0.5, "{rad}");
        }
        for t in 0..m.triangle_count() {
            let n = m.triangle_normal(t);
            let v = m.vertices[m.triangles[t][0] as usize];
            let out = [v[0] - c, v[1] - c, v[2] - c].map(|x| x as f64);
            assert!(n[0] * out[0] + n[1] * out[1] + n[2] * out[2] > 0.0);
        }
    }

    #[test]
    fn plane_is_flat() {
        let vol = analytic_volume(10, |p| 4.4 - p[2]);
        let m = marching_cubes(&vol, 0.0);
        assert!(!m.is_empty());
        for v in &m.vertices {
            assert!((v[2] - 4.4).abs() < 0.5);
        }
    }

    #[test]
    fn unobserved_cells_are_skipped() {
        let mut vol = analytic_volume(8, |p| 3.5 - p[0]);
        let full = marching_cubes(&vol, 0.0).triangle_count();
        vol.set_voxel(3, 3, 3, 0.0, 0.0);
        let holed = marching_cubes(&vol, 0.0);
        assert!(holed.triangle_count() < full);
        assert!(!holed.is_watertight());
    }

    #[test]
    fn vertex_labels_follow_nearest_voxel() {
        let mut vol = analytic_volume(6, |p| 2.2 - p[0]);
        for k in 0..6 {
            for j in 0..6 {
                vol.set_label_counts(2, j, k, [0, 0, 5, 0]);
                vol.set_label_counts(3, j, k, [0, 4, 0, 0]);
            }
        }
        let m = marching_cubes(&vol, 0.0);
        assert!(!m.labels.is_empty());
        assert!(m.labels.iter().all(|l| *l == Label::Meniscus.id()));
        assert!(m.colors.iter().all(|c| *c == [1.0, 0.0, 0.0]));
    }

    #[test]
    fn output_is_deterministic() {
        let vol = analytic_volume(12, |p| ((p[0] - 6.0).powi(2) + (p[1] - 5.5).powi(2) + (p[2] - 6.2).powi(2)).sqrt() - 3.7);
        assert_eq!(marching_cubes(&vol, 0.0), marching_cubes(&vol, 0.0));
    }
}
