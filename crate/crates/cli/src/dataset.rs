//! On-disk dataset layout written by `synth` and read by the other commands:
//!
//! ```text
//! dataset.json            camera, baseline, frame count, depth format, scene
//! trajectory.txt          camera-to-world poses, one line per frame
//! left/000000.png         8-bit RGB
//! right/000000.png
//! depth/000000.png|.dpth  left-view depth
//! labels/000000.png       indexed label map (optional)
//! ```

use std::path::{Path, PathBuf};

use arthromap::oracle::Scene;
use arthromap::pose::read_trajectory;
use arthromap::raster::io::{read_depth, read_image_png, read_label_png};
use arthromap::{DepthMap, ImageBuffer, Intrinsics, LabelMap, StereoRig, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::{DepthFormat, PinholeConfig};
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub width: usize,
    pub height: usize,
    pub pinhole: PinholeConfig,
    pub baseline_mm: f64,
    pub frames: usize,
    pub depth_format: DepthFormat,
    pub scene: Option<Scene>,
}

impl Manifest {
    pub fn rig(&self) -> CliResult<StereoRig> {
        let p = self.pinhole;
        let k = Intrinsics::new(p.fx, p.fy, p.cx, p.cy, self.width, self.height)?;
        Ok(StereoRig::new(k, self.baseline_mm)?)
    }
}

pub fn frame_name(i: usize) -> String {
    format!("{i:06}")
}

pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Option<Manifest>,
}

fn existing(path: PathBuf) -> CliResult<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingFile(path))
    }
}

impl Dataset {
    pub fn open(root: &Path) -> CliResult<Dataset> {
        if !root.is_dir() {
            return Err(CliError::MissingFile(root.to_path_buf()));
        }
        let mpath = root.join("dataset.json");
        let manifest = if mpath.exists() {
            let text = std::fs::read_to_string(&mpath)
                .map_err(|e| CliError::Core(arthromap::Error::Io { path: mpath.clone(), source: e }))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", mpath.display())))?,
            )
        } else {
            None
        };
        Ok(Dataset {
            root: root.to_path_buf(),
            manifest,
        })
    }

    /// Sorted frame names present under `left/`.
    pub fn frames(&self) -> CliResult<Vec<String>> {
        let dir = existing(self.root.join("left"))?;
        let mut names: Vec<String> = std::fs::read_dir(&dir)
            .map_err(|e| CliError::Core(arthromap::Error::Io { path: dir.clone(), source: e }))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let p = e.path();
                (p.extension()? == "png").then(|| p.file_stem()?.to_str().map(str::to_owned))?
            })
            .collect();
        names.sort();
        Ok(names)
    }

    pub fn trajectory(&self) -> CliResult<Trajectory> {
        Ok(read_trajectory(&existing(self.root.join("trajectory.txt"))?)?)
    }

    pub fn left(&self, name: &str) -> CliResult<ImageBuffer> {
        Ok(read_image_png(&existing(self.root.join("left").join(format!("{name}.png")))?)?)
    }

    pub fn right(&self, name: &str) -> CliResult<ImageBuffer> {
        Ok(read_image_png(&existing(self.root.join("right").join(format!("{name}.png")))?)?)
    }

    pub fn depth(&self, name: &str) -> CliResult<DepthMap> {
        let dir = self.root.join("depth");
        let raw = dir.join(format!("{name}.dpth"));
        let path = if raw.exists() { raw } else { dir.join(format!("{name}.png")) };
        Ok(read_depth(&existing(path)?)?)
    }

    pub fn labels(&self, name: &str) -> CliResult<Option<LabelMap>> {
        let path = self.root.join("labels").join(format!("{name}.png"));
        if path.exists() {
            Ok(Some(read_label_png(&path)?))
        } else {
            Ok(None)
        }
    }
}
