use std::path::{Path, PathBuf};

use arthromap::losses::{total_loss, PoseLossBreakdown, PoseSupervision};
use arthromap::mesh::{marching_cubes, write_ply};
use arthromap::optimizer::{recover_pose_with, PoseProblem, Status};
use arthromap::oracle::{orbit_trajectory, render, sphere_survey, OrbitConfig, Scene};
use arthromap::pose::{ate, read_trajectory, write_trajectory, AteReport};
use arthromap::raster::io::{write_depth_png, write_depth_raw, write_image_png, write_label_png};
use arthromap::tsdf::{fuse_chunk, regularize_tv_l1, write_volume, FusionChunk, FusionFrame};
use arthromap::warp::stereo_pose;
use arthromap::{Error, Label, PoseSE3, StereoRig, Trajectory};
use serde::Serialize;

use crate::config::{Config, DepthFormat, PinholeConfig, ScenePreset};
use crate::dataset::{frame_name, Dataset, Manifest};
use crate::error::{CliError, CliResult};
use crate::output::{create_dir, emit};

fn scene_for(cfg: &Config) -> CliResult<Scene> {
    let s = &cfg.synth;
    let scene = match s.scene {
        ScenePreset::Sphere => Scene::sphere([0.0; 3], 50.0, Label::Cartilage, s.seed)?,
        ScenePreset::TwoSpheres => Scene::two_spheres(s.seed)?,
        ScenePreset::Plane => Scene::plane(50.0, Label::Other, s.seed)?,
        ScenePreset::Knee => Scene::knee_phantom(s.seed)?,
    };
    Ok(scene.with_texture(s.texture))
}

fn trajectory_for(cfg: &Config, scene: &Scene) -> CliResult<Trajectory> {
    let s = &cfg.synth;
    Ok(match s.scene {
        ScenePreset::Sphere | ScenePreset::TwoSpheres => sphere_survey([0.0; 3], s.survey_distance_mm, s.frames)?,
        ScenePreset::Plane | ScenePreset::Knee => {
            let orbit = OrbitConfig {
                n: s.frames,
                sweep_mm: s.sweep_mm,
                seed: s.seed,
                ..Default::default()
            };
            orbit_trajectory(scene, &orbit)?.trajectory
        }
    })
}

#[derive(Serialize)]
pub struct SynthReport {
    pub dataset: PathBuf,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub scene: ScenePreset,
    pub seed: u64,
    pub mean_valid_depth_fraction: f64,
}

pub fn synth(cfg: &Config, out: &Path) -> CliResult<SynthReport> {
    let rig = cfg.camera.rig()?;
    let k = rig.intrinsics;
    let scene = scene_for(cfg)?;
    let traj = trajectory_for(cfg, &scene)?;
    for sub in ["left", "right", "depth", "labels"] {
        create_dir(&out.join(sub))?;
    }
    let mut valid = 0.0;
    for (i, pose) in traj.poses().enumerate() {
        let frame = render(&scene, pose, &rig);
        let name = frame_name(i);
        write_image_png(&out.join("left").join(format!("{name}.png")), &frame.left)?;
        write_image_png(&out.join("right").join(format!("{name}.png")), &frame.right)?;
        match cfg.synth.depth_format {
            DepthFormat::Png16 => write_depth_png(&out.join("depth").join(format!("{name}.png")), &frame.depth)?,
            DepthFormat::Raw => write_depth_raw(&out.join("depth").join(format!("{name}.dpth")), &frame.depth)?,
        }
        write_label_png(&out.join("labels").join(format!("{name}.png")), &frame.labels)?;
        valid += frame.depth.valid_count() as f64 / k.pixel_count() as f64;
    }
    write_trajectory(&out.join("trajectory.txt"), &traj)?;
    let manifest = Manifest {
        width: k.width,
        height: k.height,
        pinhole: PinholeConfig {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
        },
        baseline_mm: rig.baseline,
        frames: traj.len(),
        depth_format: cfg.synth.depth_format,
        scene: Some(scene),
    };
    emit(&manifest, Some(&out.join("dataset.json")))?;
    Ok(SynthReport {
        dataset: out.to_path_buf(),
        frames: traj.len(),
        width: k.width,
        height: k.height,
        scene: cfg.synth.scene,
        seed: cfg.synth.seed,
        mean_valid_depth_fraction: valid / traj.len() as f64,
    })
}

/// Camera model of a dataset: its manifest wins over the config.
fn dataset_rig(ds: &Dataset, cfg: &Config) -> CliResult<StereoRig> {
    match &ds.manifest {
        Some(m) => m.rig(),
        None => cfg.camera.rig(),
    }
}

fn checked_trajectory(ds: &Dataset, frames: &[String]) -> CliResult<Trajectory> {
    let traj = ds.trajectory()?;
    if traj.len() != frames.len() {
        return Err(Error::LengthMismatch {
            expected: frames.len(),
            actual: traj.len(),
        }
        .into());
    }
    Ok(traj)
}

fn at(traj: &Trajectory, i: usize) -> CliResult<PoseSE3> {
    traj.pose(i)
        .copied()
        .ok_or_else(|| CliError::Usage(format!("frame {i} out of range (trajectory has {})", traj.len())))
}

fn frame_index(frames: &[String], i: usize) -> CliResult<&str> {
    frames
        .get(i)
        .map(String::as_str)
        .ok_or_else(|| CliError::Usage(format!("frame {i} out of range (dataset has {})", frames.len())))
}

#[derive(Serialize)]
pub struct LossReport {
    pub target: usize,
    pub sources: Vec<usize>,
    pub stereo: bool,
    pub total: f64,
    pub self_supervised: f64,
    pub photometric: f64,
    pub smoothness: f64,
    pub lambda_smoo: f64,
    pub surviving_pixels: usize,
    pub pose: Option<PoseLossBreakdown>,
}

pub fn loss(
    cfg: &Config,
    dataset: &Path,
    target: usize,
    sources: &[usize],
    stereo: bool,
    pred: Option<&Path>,
) -> CliResult<LossReport> {
    let ds = Dataset::open(dataset)?;
    let frames = ds.frames()?;
    let gt = checked_trajectory(&ds, &frames)?;
    let rig = dataset_rig(&ds, cfg)?;
    let pred_traj = pred.map(read_trajectory).transpose()?;
    if let Some(p) = &pred_traj {
        if p.len() != gt.len() {
            return Err(Error::LengthMismatch {
                expected: gt.len(),
                actual: p.len(),
            }
            .into());
        }
    }
    let warp_traj = pred_traj.as_ref().unwrap_or(&gt);
    let tname = frame_index(&frames, target)?;
    let target_img = ds.left(tname)?;
    let depth = ds.depth(tname)?;
    let mut images = Vec::new();
    let mut poses = Vec::new();
    for &s in sources {
        images.push(ds.left(frame_index(&frames, s)?)?);
        poses.push(at(warp_traj, s)?.relative(&at(warp_traj, target)?));
    }
    if stereo {
        images.push(ds.right(tname)?);
        poses.push(stereo_pose(&rig));
    }
    if images.is_empty() {
        return Err(CliError::Usage("no source frames (give --sources or --stereo)".into()));
    }
    let supervision = match (&pred_traj, sources.first()) {
        (Some(p), Some(&s)) => Some(PoseSupervision {
            gt: at(&gt, s)?.relative(&at(&gt, target)?),
            pred: at(p, s)?.relative(&at(p, target)?),
        }),
        _ => None,
    };
    let t = total_loss(&target_img, &images, &depth, &poses, &rig.intrinsics, supervision.as_ref(), &cfg.loss)?;
    Ok(LossReport {
        target,
        sources: sources.to_vec(),
        stereo,
        total: t.total,
        self_supervised: t.self_supervised,
        photometric: t.diagnostics.photometric,
        smoothness: t.diagnostics.smoothness,
        lambda_smoo: t.diagnostics.lambda_smoo,
        surviving_pixels: t.diagnostics.surviving_pixels,
        pose: t.pose,
    })
}

#[derive(Serialize)]
pub struct PairReport {
    pub target: usize,
    pub source: usize,
    pub status: Status,
    pub iterations: usize,
    pub evaluations: usize,
    pub pose: PoseSE3,
    pub ground_truth: PoseSE3,
    pub translation_error_mm: f64,
    pub rotation_error_deg: f64,
    pub trace: Vec<f64>,
}

#[derive(Serialize)]
pub struct RecoverReport {
    pub pairs: Vec<PairReport>,
    pub trajectory: PathBuf,
}

/// Recovers frame-to-frame motion for consecutive pairs in `[start, end]`,
/// chaining the estimates from the ground-truth pose of `start`.
pub fn recover(
    cfg: &Config,
    dataset: &Path,
    start: usize,
    end: Option<usize>,
    stereo: bool,
    out: &Path,
) -> CliResult<RecoverReport> {
    let ds = Dataset::open(dataset)?;
    let frames = ds.frames()?;
    let gt = checked_trajectory(&ds, &frames)?;
    let rig = dataset_rig(&ds, cfg)?;
    let end = end.unwrap_or(frames.len().saturating_sub(1));
    if start >= end || end >= frames.len() {
        return Err(CliError::Usage(format!(
            "need start < end < {}, got {start}..{end}",
            frames.len()
        )));
    }
    create_dir(out)?;
    let mut chained = vec![(gt.frames()[start].0, at(&gt, start)?)];
    let mut pairs = Vec::new();
    for s in start..end {
        let t = s + 1;
        let tname = frame_index(&frames, t)?;
        let mut fixed = Vec::new();
        if stereo {
            fixed.push((ds.right(tname)?, stereo_pose(&rig)));
        }
        let problem = PoseProblem {
            target: ds.left(tname)?,
            source: ds.left(frame_index(&frames, s)?)?,
            fixed,
            depth: ds.depth(tname)?,
            k: rig.intrinsics,
        };
        let rec = recover_pose_with(&problem, &PoseSE3::identity(), &cfg.recover_loss, &cfg.optimizer)?;
        let truth = at(&gt, s)?.relative(&at(&gt, t)?);
        let err = rec.pose.relative(&truth);
        let last = chained.last().expect("seeded").1;
        chained.push((gt.frames()[t].0, last.compose(&rec.pose)));
        pairs.push(PairReport {
            target: t,
            source: s,
            status: rec.status,
            iterations: rec.iterations,
            evaluations: rec.evaluations,
            pose: rec.pose,
            ground_truth: truth,
            translation_error_mm: err.translation_norm(),
            rotation_error_deg: err.rotation_angle().to_degrees(),
            trace: rec.trace,
        });
    }
    let traj_path = out.join("trajectory.txt");
    write_trajectory(&traj_path, &Trajectory::new(chained)?)?;
    let report = RecoverReport {
        pairs,
        trajectory: traj_path,
    };
    emit(&report, Some(&out.join("recover.json")))?;
    Ok(report)
}

#[derive(Serialize)]
pub struct TvL1Summary {
    pub lambda: f64,
    pub iters: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
}

#[derive(Serialize)]
pub struct FuseReport {
    pub frames: usize,
    pub labels: bool,
    pub dims: [usize; 3],
    pub origin: [f32; 3],
    pub voxel_size: f32,
    pub truncation: f32,
    pub observed_voxels: usize,
    pub tv_l1: Option<TvL1Summary>,
    pub vertices: usize,
    pub triangles: usize,
    pub watertight: bool,
    pub euler_characteristic: i64,
    /// Vertex count per label id.
    pub label_vertices: [usize; 4],
    pub volume: PathBuf,
    pub mesh: PathBuf,
}

pub fn fuse(cfg: &Config, dataset: &Path, out: &Path) -> CliResult<FuseReport> {
    let ds = Dataset::open(dataset)?;
    let frames = ds.frames()?;
    let traj = checked_trajectory(&ds, &frames)?;
    let rig = dataset_rig(&ds, cfg)?;
    let use_labels = cfg.fusion.use_labels;
    let mut chunk = FusionChunk::default();
    for (name, pose) in frames.iter().zip(traj.poses()) {
        chunk.frames.push(FusionFrame {
            depth: ds.depth(name)?,
            labels: if use_labels { ds.labels(name)? } else { None },
            pose: *pose,
        });
    }
    let labels = chunk.frames.iter().any(|f| f.labels.is_some());
    let mut vol = fuse_chunk(&chunk, &cfg.fusion.params(), &rig.intrinsics)?;
    let observed = vol.observed_count();
    let tv_l1 = match cfg.fusion.tv_l1 {
        Some(tv) => {
            let (reg, rep) = regularize_tv_l1(&vol, tv.lambda, tv.iters)?;
            vol = reg;
            Some(TvL1Summary {
                lambda: tv.lambda,
                iters: tv.iters,
                initial_energy: rep.energies[0],
                final_energy: *rep.energies.last().expect("energies"),
            })
        }
        None => None,
    };
    let mesh = marching_cubes(&vol, cfg.fusion.iso);
    create_dir(out)?;
    let volume_path = out.join("volume.tsdf");
    let mesh_path = out.join("mesh.ply");
    write_volume(&volume_path, &vol)?;
    write_ply(&mesh_path, &mesh, cfg.fusion.ply_format)?;
    let mut label_vertices = [0; 4];
    for l in &mesh.labels {
        label_vertices[*l as usize] += 1;
    }
    let report = FuseReport {
        frames: frames.len(),
        labels,
        dims: vol.dims(),
        origin: vol.origin(),
        voxel_size: vol.voxel_size(),
        truncation: vol.truncation(),
        observed_voxels: observed,
        tv_l1,
        vertices: mesh.vertex_count(),
        triangles: mesh.triangle_count(),
        watertight: mesh.is_watertight(),
        euler_characteristic: mesh.euler_characteristic(),
        label_vertices,
        volume: volume_path,
        mesh: mesh_path,
    };
    emit(&report, Some(&out.join("fuse.json")))?;
    Ok(report)
}

pub fn eval_ate(gt: &Path, est: &Path, align: bool) -> CliResult<AteReport> {
    let gt = read_trajectory(gt)?;
    let est = read_trajectory(est)?;
    Ok(ate(&gt, &est, align)?)
}
