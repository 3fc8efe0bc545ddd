use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::PoseSE3;
use crate::raster::Label;

/// Analytic surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Plane { point: [f64; 3], normal: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
    /// Segment `a`-`b` swept by a ball of `radius`.
    Capsule { a: [f64; 3], b: [f64; 3], radius: f64 },
}

/// Ray hit in the ray's own parameterization `origin + t * dir`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Hit {
    pub t: f64,
    pub normal: Vector3<f64>,
}

fn sphere_hit(o: &Point3<f64>, d: &Vector3<f64>, c: &Point3<f64>, r: f64) -> Option<f64> {
    let oc = o - c;
    let a = d.dot(d);
    let half_b = d.dot(&oc);
    let cc = oc.dot(&oc) - r * r;
    let disc = half_b * half_b - a * cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let q = -(half_b + half_b.signum() * sq);
    let (t0, t1) = if q != 0.0 { (q / a, cc / q) } else { (0.0, 0.0) };
    let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
    if lo > 0.0 {
        Some(lo)
    } else if hi > 0.0 {
        Some(hi)
    } else {
        None
    }
}

impl Shape {
    pub(crate) fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<Hit> {
        match self {
            Shape::Plane { point, normal } => {
                let n = Vector3::from(*normal).normalize();
                let denom = n.dot(d);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let t = n.dot(&(Point3::from(*point) - o)) / denom;
                (t > 0.0).then(|| Hit {
                    t,
                    normal: if denom > 0.0 { -n } else { n },
                })
            }
            Shape::Sphere { center, radius } => {
                let c = Point3::from(*center);
                let t = sphere_hit(o, d, &c, *radius)?;
                Some(Hit {
                    t,
                    normal: ((o + d * t) - c) / *radius,
                })
            }
            Shape::Capsule { a, b, radius } => {
                let (pa, pb) = (Point3::from(*a), Point3::from(*b));
                let ba = pb - pa;
                let baba = ba.dot(&ba);
                let mut best: Option<f64> = None;
                let mut keep = |t: Option<f64>| {
                    if let Some(t) = t.filter(|t| *t > 0.0) {
                        if best.is_none_or(|b| t < b) {
                            best = Some(t);
                        }
                    }
                };
                // cylindrical body, entry point only, valid between the end caps
                let oa = o - pa;
                let (dd, bad, baoa) = (d.dot(d), ba.dot(d), ba.dot(&oa));
                let qa = baba * dd - bad * bad;
                if qa > 1e-12 * baba * dd {
                    let qb = baba * d.dot(&oa) - baoa * bad;
                    let qc = baba * oa.dot(&oa) - baoa * baoa - radius * radius * baba;
                    let h = qb * qb - qa * qc;
                    if h >= 0.0 {
                        let t = (-qb - h.sqrt()) / qa;
                        let y = baoa + t * bad;
                        if y > 0.0 && y < baba {
                            keep(Some(t));
                        }
                    }
                }
                keep(sphere_hit(o, d, &pa, *radius));
                keep(sphere_hit(o, d, &pb, *radius));
                let t = best?;
                let p = o + d * t;
                let s = ((p - pa).dot(&ba) / baba).clamp(0.0, 1.0);
                let axis_pt = pa + ba * s;
                Some(Hit {
                    t,
                    normal: (p - axis_pt) / *radius,
                })
            }
        }
    }

    /// Signed distance from `p` to the surface (positive outside; for planes,
    /// positive on the normal side).
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        match self {
            Shape::Plane { point, normal } => {
                Vector3::from(*normal).normalize().dot(&(p - Point3::from(*point)))
            }
            Shape::Sphere { center, radius } => (p - Point3::from(*center)).norm() - radius,
            Shape::Capsule { a, b, radius } => {
                let (pa, pb) = (Point3::from(*a), Point3::from(*b));
                let ba = pb - pa;
                let s = ((p - pa).dot(&ba) / ba.dot(&ba)).clamp(0.0, 1.0);
                (p - (pa + ba * s)).norm() - radius
            }
        }
    }

    /// Whether `p` lies inside the solid (planes bound no solid).
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        !matches!(self, Shape::Plane { .. }) && self.signed_distance(p) < 0.0
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Shape::Plane { normal, .. } => Vector3::from(*normal).norm() > 0.0,
            Shape::Sphere { radius, .. } => *radius > 0.0,
            Shape::Capsule { a, b, radius } => *radius > 0.0 && a != b,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("degenerate primitive {self:?}")))
        }
    }
}

/// Labeled, colored primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub label: Label,
    /// Base reflectance per channel.
    pub albedo: [f64; 3],
}

/// Procedural solid texture strength.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureMode {
    /// Strong multi-octave albedo variation, like a printed phantom.
    Rich,
    /// Faint variation, like real tissue.
    Low,
    /// Uniform albedo.
    None,
}

impl TextureMode {
    pub fn contrast(self) -> f64 {
        match self {
            TextureMode::Rich => 0.75,
            TextureMode::Low => 0.02,
            TextureMode::None => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Texture {
    pub mode: TextureMode,
    /// Size of the coarsest noise cell, mm.
    pub cell_mm: f64,
    pub octaves: u32,
}

impl Default for Texture {
    fn default() -> Self {
        Texture {
            mode: TextureMode::Rich,
            cell_mm: 6.0,
            octaves: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lighting {
    pub ambient: f64,
    /// World-fixed directional light: direction toward the light and intensity.
    pub directional: Option<([f64; 3], f64)>,
    /// Point light at the camera center with inverse-square falloff,
    /// normalized to `intensity` at `reference_mm`. Breaks brightness constancy.
    pub camera_light: Option<CameraLight>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraLight {
    pub intensity: f64,
    pub reference_mm: f64,
}

impl Default for Lighting {
    fn default() -> Self {
        Lighting {
            ambient: 0.55,
            directional: Some(([0.3, -0.5, -0.8], 0.45)),
            camera_light: None,
        }
    }
}

/// Synthetic scene: primitives, texture, lighting and a default viewpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    #[serde(default)]
    pub texture: Texture,
    #[serde(default)]
    pub lighting: Lighting,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub background: [f64; 3],
    /// Camera-to-world pose that frames the scene.
    #[serde(default)]
    pub viewpoint: PoseSE3,
}

impl Scene {
    pub fn new(primitives: Vec<Primitive>, seed: u64) -> Result<Self> {
        let s = Scene {
            primitives,
            texture: Texture::default(),
            lighting: Lighting::default(),
            seed,
            background: [0.0; 3],
            viewpoint: PoseSE3::identity(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::Empty("scene primitives"));
        }
        for p in &self.primitives {
            p.shape.validate()?;
        }
        Ok(())
    }

    pub fn with_texture(mut self, mode: TextureMode) -> Self {
        self.texture.mode = mode;
        self
    }

    /// Fronto-parallel plane `z = depth` in front of the default camera.
    pub fn plane(depth: f64, label: Label, seed: u64) -> Result<Self> {
        Scene::new(
            vec![Primitive {
                shape: Shape::Plane {
                    point: [0.0, 0.0, depth],
                    normal: [0.0, 0.0, -1.0],
                },
                label,
                albedo: [0.85, 0.8, 0.75],
            }],
            seed,
        )
    }

    pub fn sphere(center: [f64; 3], radius: f64, label: Label, seed: u64) -> Result<Self> {
        Scene::new(
            vec![Primitive {
                shape: Shape::Sphere { center, radius },
                label,
                albedo: [0.9, 0.85, 0.8],
            }],
            seed,
        )
    }

    /// Two separated spheres with different labels, framed by a survey around
    /// the origin: cartilage at negative x, meniscus at positive x.
    pub fn two_spheres(seed: u64) -> Result<Self> {
        let ball = |x: f64, label| Primitive {
            shape: Shape::Sphere {
                center: [x, 0.0, 0.0],
                radius: 26.0,
            },
            label,
            albedo: [0.9, 0.85, 0.8],
        };
        Scene::new(vec![ball(-32.0, Label::Cartilage), ball(32.0, Label::Meniscus)], seed)
    }

    /// Knee-like arrangement seen from the default camera: tibial plateau
    /// plane, two femoral condyles, a meniscus rim and the ACL.
    pub fn knee_phantom(seed: u64) -> Result<Self> {
        let p = |shape, label, albedo| Primitive { shape, label, albedo };
        Scene::new(
            vec![
                p(
                    Shape::Plane {
                        point: [0.0, 0.0, 62.0],
                        normal: [0.05, -0.25, -1.0],
                    },
                    Label::Other,
                    [0.8, 0.72, 0.65],
                ),
                p(
                    Shape::Sphere {
                        center: [-13.0, -6.0, 52.0],
                        radius: 13.0,
                    },
                    Label::Cartilage,
                    [0.92, 0.9, 0.85],
                ),
                p(
                    Shape::Sphere {
                        center: [15.0, -4.0, 55.0],
                        radius: 12.0,
                    },
                    Label::Cartilage,
                    [0.9, 0.88, 0.86],
                ),
                p(
                    Shape::Capsule {
                        a: [-22.0, 14.0, 48.0],
                        b: [8.0, 16.0, 44.0],
                        radius: 4.0,
                    },
                    Label::Meniscus,
                    [0.85, 0.6, 0.55],
                ),
                p(
                    Shape::Capsule {
                        a: [2.0, -14.0, 50.0],
                        b: [6.0, 10.0, 40.0],
                        radius: 3.0,
                    },
                    Label::Acl,
                    [0.95, 0.8, 0.7],
                ),
            ],
            seed,
        )
    }

    /// Centroid of the bounded primitives (or of the plane anchors).
    pub fn focus(&self) -> Point3<f64> {
        let pts: Vec<Point3<f64>> = self
            .primitives
            .iter()
            .filter_map(|p| match &p.shape {
                Shape::Sphere { center, .. } => Some(Point3::from(*center)),
                Shape::Capsule { a, b, .. } => Some(Point3::from((Vector3::from(*a) + Vector3::from(*b)) * 0.5)),
                Shape::Plane { .. } => None,
            })
            .collect();
        let pts = if pts.is_empty() {
            self.primitives
                .iter()
                .filter_map(|p| match &p.shape {
                    Shape::Plane { point, .. } => Some(Point3::from(*point)),
                    _ => None,
                })
                .collect()
        } else {
            pts
        };
        let n = pts.len() as f64;
        Point3::from(pts.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_hit_is_exact() {
        let s = Shape::Plane {
            point: [0.0, 0.0, 50.0],
            normal: [0.0, 0.0, -1.0],
        };
        let h = s.intersect(&Point3::origin(), &Vector3::new(0.3, -0.2, 1.0)).unwrap();
        assert_eq!(h.t, 50.0);
        assert_eq!(h.normal, Vector3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn capsule_hits_body_and_caps() {
        let cap = Shape::Capsule {
            a: [-10.0, 0.0, 30.0],
            b: [10.0, 0.0, 30.0],
            radius: 2.0,
        };
        let o = Point3::origin();
        assert!((cap.intersect(&o, &Vector3::z()).unwrap().t - 28.0).abs() < 1e-12);
        let end = cap.intersect(&o, &Vector3::new(12.0 / 30.0, 0.0, 1.0)).unwrap();
        let p = o + Vector3::new(12.0 / 30.0, 0.0, 1.0) * end.t;
        assert!(cap.signed_distance(&p).abs() < 1e-9);
        assert!(cap.intersect(&o, &Vector3::new(0.0, 1.0, 1.0)).is_none());
        // looking straight down the axis
        let axial = Shape::Capsule {
            a: [0.0, 0.0, 20.0],
            b: [0.0, 0.0, 40.0],
            radius: 1.0,
        };
        assert!((axial.intersect(&o, &Vector3::z()).unwrap().t - 19.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_behind_camera_misses() {
        let s = Shape::Sphere {
            center: [0.0, 0.0, -20.0],
            radius: 5.0,
        };
        assert!(s.intersect(&Point3::origin(), &Vector3::z()).is_none());
    }

    #[test]
    fn degenerate_primitives_rejected() {
        assert!(Scene::sphere([0.0; 3], 0.0, Label::Other, 0).is_err());
        assert!(Scene::new(vec![], 0).is_err());
    }
}
