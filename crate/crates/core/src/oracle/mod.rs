//! Synthetic ground truth: analytic ray casting of labeled primitives with a
//! seeded procedural texture, plus camera trajectory generators.
//!
//! Depth is the camera-frame z of the nearest hit, so for any pixel with a hit
//! `camera.backproject(u, v, depth)` lies on the primitive up to rounding.
//! Rendering is deterministic for a given scene, pose and rig.

mod noise;
mod scene;
mod trajectory;

pub use scene::{CameraLight, Lighting, Primitive, Scene, Shape, Texture, TextureMode};
pub use trajectory::{look_at, orbit_trajectory, sphere_survey, OrbitConfig, OrbitTrajectory};

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::camera::{Intrinsics, StereoRig};
use crate::pose::PoseSE3;
use crate::raster::{DepthMap, ImageBuffer, LabelMap};
use crate::warp::stereo_pose;

/// One rendered camera view.
#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub image: ImageBuffer,
    pub depth: DepthMap,
    pub labels: LabelMap,
}

/// Rectified stereo frame; depth and labels belong to the left view.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoFrame {
    pub left: ImageBuffer,
    pub right: ImageBuffer,
    pub depth: DepthMap,
    pub labels: LabelMap,
}

struct Shaded {
    color: [f64; 3],
    depth: f64,
    label: u8,
}

fn shade_pixel(scene: &Scene, origin: &Point3<f64>, dir: &Vector3<f64>) -> Shaded {
    let mut best: Option<(usize, scene::Hit)> = None;
    for (i, prim) in scene.primitives.iter().enumerate() {
        if let Some(h) = prim.shape.intersect(origin, dir) {
            if best.as_ref().is_none_or(|(_, b)| h.t < b.t) {
                best = Some((i, h));
            }
        }
    }
    let Some((idx, hit)) = best else {
        return Shaded {
            color: scene.background,
            depth: 0.0,
            label: 0,
        };
    };
    let prim = &scene.primitives[idx];
    let p = origin + dir * hit.t;
    let n = hit.normal;

    let contrast = scene.texture.mode.contrast();
    let factor = if contrast > 0.0 {
        let offset = Vector3::new(137.1, 71.3, 19.7) * idx as f64;
        let q = (p.coords + offset) / scene.texture.cell_mm;
        (1.0 - contrast) + contrast * noise::fbm(&q, scene.texture.octaves, scene.seed)
    } else {
        1.0
    };

    let light = &scene.lighting;
    let mut intensity = light.ambient;
    if let Some((l, s)) = light.directional {
        let l = Vector3::from(l).normalize();
        intensity += s * n.dot(&l).max(0.0);
    }
    if let Some(cl) = light.camera_light {
        let dist = hit.t * dir.norm();
        let view = -dir.normalize();
        intensity += cl.intensity * n.dot(&view).max(0.0) * (cl.reference_mm / dist).powi(2);
    }
    let color = prim.albedo.map(|a| (a * factor * intensity).clamp(0.0, 1.0));
    Shaded {
        color,
        depth: hit.t,
        label: prim.label.id(),
    }
}

/// Ray-casts a single view from camera-to-world `pose`.
pub fn render_view(scene: &Scene, pose: &PoseSE3, k: &Intrinsics) -> View {
    let (w, h) = (k.width, k.height);
    let rot = pose.rotation();
    let origin = Point3::from(pose.translation());
    let rows: Vec<Vec<Shaded>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| {
                    let dir = rot * k.ray(u as f64, v as f64);
                    shade_pixel(scene, &origin, &dir)
                })
                .collect()
        })
        .collect();
    let mut color = Vec::with_capacity(w * h * 3);
    let mut depth = Vec::with_capacity(w * h);
    let mut labels = Vec::with_capacity(w * h);
    for s in rows.into_iter().flatten() {
        color.extend_from_slice(&s.color);
        depth.push(s.depth);
        labels.push(s.label);
    }
    View {
        image: ImageBuffer::from_raw_unchecked(w, h, 3, color),
        depth: DepthMap::new(w, h, depth).expect("ray depths are finite and non-negative"),
        labels: LabelMap::new(w, h, labels).expect("labels come from Label ids"),
    }
}

/// Renders the left view (with depth and labels) and the right view of `rig`
/// placed at camera-to-world `pose`.
pub fn render(scene: &Scene, pose: &PoseSE3, rig: &StereoRig) -> StereoFrame {
    let left = render_view(scene, pose, &rig.intrinsics);
    let right_pose = pose.compose(&stereo_pose(rig).inverse());
    let right = render_view(scene, &right_pose, &rig.intrinsics);
    StereoFrame {
        left: left.image,
        right: right.image,
        depth: left.depth,
        labels: left.labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Label;

    #[test]
    fn plane_depth_is_exact() {
        let k = Intrinsics::from_fov(87.5, 32, 24).unwrap();
        let scene = Scene::plane(50.0, Label::Cartilage, 1).unwrap();
        let v = render_view(&scene, &PoseSE3::identity(), &k);
        assert!(v.depth.data().iter().all(|d| *d == 50.0));
        assert!(v.labels.data().iter().all(|l| *l == 1));
    }

    #[test]
    fn sphere_depth_minimum_on_axis() {
        let k = Intrinsics::from_fov(60.0, 33, 33).unwrap();
        let scene = Scene::sphere([0.0, 0.0, 80.0], 20.0, Label::Acl, 1).unwrap();
        let v = render_view(&scene, &PoseSE3::identity(), &k);
        let center = v.depth.get(16, 16);
        assert!((center - 60.0).abs() < 1e-12);
        let min = v.depth.data().iter().filter(|d| **d > 0.0).cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(min, center);
    }

    #[test]
    fn misses_are_background() {
        let k = Intrinsics::from_fov(60.0, 16, 16).unwrap();
        let scene = Scene::sphere([0.0, 0.0, 80.0], 2.0, Label::Acl, 1).unwrap();
        let v = render_view(&scene, &PoseSE3::identity(), &k);
        assert_eq!(v.depth.get(0, 0), 0.0);
        assert_eq!(v.labels.get(0, 0), Label::Other);
        assert_eq!(v.image.pixel(0, 0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn camera_light_darkens_with_distance() {
        let k = Intrinsics::from_fov(60.0, 8, 8).unwrap();
        let mut scene = Scene::plane(20.0, Label::Other, 3).unwrap().with_texture(TextureMode::None);
        scene.lighting = Lighting {
            ambient: 0.0,
            directional: None,
            camera_light: Some(CameraLight {
                intensity: 0.8,
                reference_mm: 20.0,
            }),
        };
        let near = render_view(&scene, &PoseSE3::identity(), &k);
        let far = render_view(&scene, &PoseSE3::from_translation(0.0, 0.0, -20.0), &k);
        assert!(far.image.get(4, 4, 0) < near.image.get(4, 4, 0) * 0.3);
    }
}
