//! Run configuration. One JSON file covers every subcommand; absent keys take
//! their defaults and command-line flags override both.

use std::path::{Path, PathBuf};

use arthromap::losses::LossConfig;
use arthromap::mesh::PlyFormat;
use arthromap::optimizer::OptimizerConfig;
use arthromap::oracle::TextureMode;
use arthromap::raster::SampleMode;
use arthromap::tsdf::FusionParams;
use arthromap::{Intrinsics, StereoRig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub camera: CameraConfig,
    pub loss: LossConfig,
    /// Objective minimized by `recover-pose`. Border padding without the
    /// auto-mask: a masked mean lets poses that look away from the scene win.
    pub recover_loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub fusion: FusionConfig,
    pub synth: SynthConfig,
    pub paths: PathsConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            camera: CameraConfig::default(),
            loss: LossConfig::default(),
            recover_loss: LossConfig {
                automask: false,
                sample_mode: SampleMode::Clamped,
                ..LossConfig::default()
            },
            optimizer: OptimizerConfig::default(),
            fusion: FusionConfig::default(),
            synth: SynthConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinholeConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view, degrees. Ignored when `pinhole` is set.
    pub fov_deg: f64,
    pub pinhole: Option<PinholeConfig>,
    pub baseline_mm: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            width: 256,
            height: 256,
            fov_deg: StereoRig::ARTHROSCOPE_FOV_DEG,
            pinhole: None,
            baseline_mm: StereoRig::ARTHROSCOPE_BASELINE_MM,
        }
    }
}

impl CameraConfig {
    pub fn rig(&self) -> CliResult<StereoRig> {
        let k = match self.pinhole {
            Some(p) => Intrinsics::new(p.fx, p.fy, p.cx, p.cy, self.width, self.height)?,
            None => Intrinsics::from_fov(self.fov_deg, self.width, self.height)?,
        };
        Ok(StereoRig::new(k, self.baseline_mm)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvL1Config {
    pub lambda: f64,
    pub iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub voxel_size: f32,
    pub truncation: f32,
    pub origin: Option<[f32; 3]>,
    pub dims: Option<[usize; 3]>,
    pub max_weight: f32,
    pub use_labels: bool,
    pub tv_l1: Option<TvL1Config>,
    pub iso: f32,
    pub ply_format: PlyFormat,
}

impl Default for FusionConfig {
    fn default() -> Self {
        let p = FusionParams::default();
        FusionConfig {
            voxel_size: p.voxel_size,
            truncation: p.truncation,
            origin: p.origin,
            dims: p.dims,
            max_weight: p.max_weight,
            use_labels: true,
            tv_l1: None,
            iso: 0.0,
            ply_format: PlyFormat::Binary,
        }
    }
}

impl FusionConfig {
    pub fn params(&self) -> FusionParams {
        FusionParams {
            voxel_size: self.voxel_size,
            truncation: self.truncation,
            origin: self.origin,
            dims: self.dims,
            max_weight: self.max_weight,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScenePreset {
    /// Single sphere, surveyed from all directions.
    #[default]
    Sphere,
    /// Two labeled spheres, surveyed from all directions.
    TwoSpheres,
    /// Fronto-parallel plane with a lateral sweep.
    Plane,
    /// Knee-like phantom with a lateral sweep.
    Knee,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DepthFormat {
    /// 16-bit PNG, 0.1 mm per count.
    #[default]
    Png16,
    /// Lossless float32 raster.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub scene: ScenePreset,
    pub frames: usize,
    pub seed: u64,
    pub texture: TextureMode,
    /// Lateral sweep length for plane and knee scenes, mm.
    pub sweep_mm: f64,
    /// Camera distance from the scene center for surveyed scenes, mm.
    pub survey_distance_mm: f64,
    pub depth_format: DepthFormat,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            scene: ScenePreset::Sphere,
            frames: 100,
            seed: 0,
            texture: TextureMode::Rich,
            sweep_mm: 20.0,
            survey_distance_mm: 120.0,
            depth_format: DepthFormat::Png16,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> CliResult<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingFile(path.to_path_buf()),
            _ => CliError::Config(format!("{}: {e}", path.display())),
        })?;
        let cfg: Config =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.camera.rig()?;
        self.loss.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.recover_loss.validate().map_err(|e| CliError::Config(format!("recover_loss: {e}")))?;
        self.optimizer.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(tv) = &self.fusion.tv_l1 {
            if !(tv.lambda > 0.0) {
                return Err(CliError::Config("fusion.tv_l1.lambda must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn dataset_dir(&self, flag: Option<&Path>) -> CliResult<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.paths.dataset.clone())
            .ok_or_else(|| CliError::Config("no dataset directory given (--dataset or paths.dataset)".into()))
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> CliResult<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.paths.output.clone())
            .ok_or_else(|| CliError::Config("no output directory given (--out or paths.output)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let cfg: Config = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, Config::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn recovery_objective_defaults_to_clamped_without_automask() {
        let cfg = Config::default();
        assert!(!cfg.recover_loss.automask);
        assert_eq!(cfg.recover_loss.sample_mode, SampleMode::Clamped);
        assert!(cfg.loss.automask);
        // A written section is complete on its own; omitted keys take the loss defaults.
        let cfg: Config = serde_json::from_str(r#"{"recover_loss": {"alpha": 0.5}}"#).unwrap();
        assert!(cfg.recover_loss.automask);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{"camera": {"fov": 90}}"#).is_err());
        assert!(serde_json::from_str::<Config>(r#"{"fusion": {"voxel": 1}}"#).is_err());
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let cfg: Config =
            serde_json::from_str(r#"{"synth": {"scene": "knee", "frames": 5}, "fusion": {"tv_l1": {"lambda": 0.5, "iters": 10}}}"#)
                .unwrap();
        assert_eq!(cfg.synth.scene, ScenePreset::Knee);
        assert_eq!(cfg.synth.frames, 5);
        assert_eq!(cfg.synth.sweep_mm, 20.0);
        assert_eq!(cfg.fusion.voxel_size, 1.0);
        assert_eq!(cfg.fusion.tv_l1.unwrap().iters, 10);
    }

    #[test]
    fn bad_values_fail_validation() {
        let cfg: Config = serde_json::from_str(r#"{"camera": {"fov_deg": 200}}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: Config = serde_json::from_str(r#"{"loss": {"alpha": 2.0}}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }
}
