use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{Error, Result};
use crate::pose::{PoseSE3, Trajectory};

/// Recording frame rate of the generated sequences.
pub const FRAME_RATE_HZ: f64 = 25.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitConfig {
    pub n: usize,
    /// Total translation along `axis`, mm.
    pub sweep_mm: f64,
    /// Ratio between the fastest and slowest frame-to-frame step.
    pub speed_ratio: f64,
    /// Amplitude of the smooth rotation wobble per axis, degrees.
    pub rotation_jitter_deg: f64,
    /// Sweep direction in the viewpoint's camera frame.
    pub axis: [f64; 3],
    pub seed: u64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig {
            n: 100,
            sweep_mm: 20.0,
            speed_ratio: 20.0,
            rotation_jitter_deg: 1.5,
            axis: [1.0, 0.0, 0.0],
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrbitTrajectory {
    pub trajectory: Trajectory,
    /// Translation norm of each frame-to-frame motion, mm.
    pub step_translation: Vec<f64>,
    /// Rotation angle of each frame-to-frame motion, radians.
    pub step_rotation: Vec<f64>,
}

/// Translation-dominant sweep past the scene's viewpoint, sampled at 25 fps.
///
/// Step lengths follow a raised-cosine speed profile from 1 to `speed_ratio`,
/// so consecutive motions differ in size by up to that factor. A smooth seeded
/// wobble of `rotation_jitter_deg` is added to the orientation.
pub fn orbit_trajectory(scene: &Scene, cfg: &OrbitConfig) -> Result<OrbitTrajectory> {
    if cfg.n < 2 {
        return Err(Error::Domain(format!("trajectory needs at least 2 frames, got {}", cfg.n)));
    }
    let axis = Vector3::from(cfg.axis);
    if !(axis.norm() > 0.0) || !(cfg.speed_ratio >= 1.0) || !(cfg.sweep_mm >= 0.0) {
        return Err(Error::Domain("invalid orbit configuration".into()));
    }
    let axis = axis.normalize();
    let steps = cfg.n - 1;
    let speeds: Vec<f64> = (0..steps)
        .map(|j| {
            if steps == 1 {
                1.0
            } else {
                let phase = 2.0 * std::f64::consts::PI * j as f64 / (steps - 1) as f64;
                1.0 + (cfg.speed_ratio - 1.0) * (0.5 - 0.5 * phase.cos())
            }
        })
        .collect();
    let total: f64 = speeds.iter().sum();
    let mut progress = vec![0.0];
    for s in &speeds {
        progress.push(progress.last().unwrap() + s / total);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amp = cfg.rotation_jitter_deg.to_radians();
    let waves: Vec<(f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(std::f64::consts::PI..3.0 * std::f64::consts::PI),
            )
        })
        .collect();

    let frames = progress
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let tau = i as f64 / steps as f64;
            let rot = [0, 1, 2].map(|k| amp * (waves[k].0 + waves[k].1 * tau).sin());
            let trl = axis * ((s - 0.5) * cfg.sweep_mm);
            let local = PoseSE3::new(rot, [trl.x, trl.y, trl.z])?;
            Ok((i as f64 / FRAME_RATE_HZ, scene.viewpoint.compose(&local)))
        })
        .collect::<Result<Vec<_>>>()?;
    let trajectory = Trajectory::new(frames)?;
    let motions = trajectory.relative_motions();
    Ok(OrbitTrajectory {
        step_translation: motions.iter().map(PoseSE3::translation_norm).collect(),
        step_rotation: motions.iter().map(PoseSE3::rotation_angle).collect(),
        trajectory,
    })
}

/// Camera-to-world pose at `eye` looking at `target` (camera x right, y down, z forward).
pub fn look_at(eye: &Point3<f64>, target: &Point3<f64>) -> PoseSE3 {
    let z = (target - eye).normalize();
    let mut hint = Vector3::y();
    if z.cross(&hint).norm() < 1e-6 {
        hint = Vector3::x();
    }
    let x = hint.cross(&z).normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_columns(&[x, y, z]);
    PoseSE3::from_rotation_translation(&r, &eye.coords)
}

/// `n` cameras spread evenly (Fibonacci lattice) on a sphere of radius
/// `distance` around `center`, all looking at it.
pub fn sphere_survey(center: [f64; 3], distance: f64, n: usize) -> Result<Trajectory> {
    if n == 0 || !(distance > 0.0) {
        return Err(Error::Domain("survey needs n >= 1 and positive distance".into()));
    }
    let c = Point3::from(center);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    Trajectory::new(
        (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let phi = golden * i as f64;
                let dir = Vector3::new(r * phi.cos(), y, r * phi.sin());
                (i as f64 / FRAME_RATE_HZ, look_at(&(c + dir * distance), &c))
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Label;

    fn scene() -> Scene {
        Scene::plane(50.0, Label::Other, 0).unwrap()
    }

    #[test]
    fn two_frames_sweep_apart() {
        let cfg = OrbitConfig {
            n: 2,
            sweep_mm: 10.0,
            rotation_jitter_deg: 0.0,
            ..Default::default()
        };
        let o = orbit_trajectory(&scene(), &cfg).unwrap();
        let p = o.trajectory.pose(0).unwrap().relative(o.trajectory.pose(1).unwrap());
        assert!((p.translation_norm() - 10.0).abs() < 1e-12);
        assert!(p.rotation_angle() < 1e-12);
    }

    #[test]
    fn timestamps_at_frame_rate() {
        let o = orbit_trajectory(&scene(), &OrbitConfig::default()).unwrap();
        for (i, t) in o.trajectory.timestamps().enumerate() {
            assert_eq!(t, i as f64 / 25.0);
        }
    }

    #[test]
    fn step_sizes_span_ratio() {
        let o = orbit_trajectory(&scene(), &OrbitConfig { n: 101, ..Default::default() }).unwrap();
        let max = o.step_translation.iter().cloned().fold(0.0, f64::max);
        let min = o.step_translation.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min > 18.0 && max / min < 22.0, "{}", max / min);
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = orbit_trajectory(&scene(), &OrbitConfig { seed: 5, ..Default::default() }).unwrap();
        let b = orbit_trajectory(&scene(), &OrbitConfig { seed: 5, ..Default::default() }).unwrap();
        let c = orbit_trajectory(&scene(), &OrbitConfig { seed: 6, ..Default::default() }).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_ne!(a.trajectory, c.trajectory);
    }

    #[test]
    fn look_at_points_forward() {
        let eye = Point3::new(10.0, -5.0, 3.0);
        let p = look_at(&eye, &Point3::origin());
        let fwd = p.rotation() * Vector3::z();
        assert!((fwd - (-eye.coords).normalize()).norm() < 1e-12);
        assert!((p.rotation().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn survey_cameras_face_center() {
        let t = sphere_survey([1.0, 2.0, 3.0], 100.0, 50).unwrap();
        for p in t.poses() {
            let to_center = Vector3::new(1.0, 2.0, 3.0) - p.translation();
            assert!((to_center.norm() - 100.0).abs() < 1e-9);
            let fwd = p.rotation() * Vector3::z();
            assert!((fwd - to_center.normalize()).norm() < 1e-9);
        }
    }
}
