//! Semantic 3D mapping from stereo arthroscopy: camera and pose geometry,
//! view synthesis, self-supervised photometric objectives, pose recovery,
//! TSDF fusion with label histograms, mesh extraction, and a ray-traced
//! synthetic scene generator used as ground truth.
//!
//! Lengths are millimeters, angles radians, images `f64` in `[0, 1]`.

pub mod camera;
pub mod error;
pub mod losses;
pub mod mesh;
pub mod optimizer;
pub mod oracle;
pub mod pose;
pub mod raster;
pub mod tsdf;
pub mod warp;

pub use camera::{Intrinsics, StereoRig};
pub use error::{Error, Result};
pub use losses::LossConfig;
pub use mesh::{marching_cubes, Mesh};
pub use optimizer::{recover_pose, OptimizerConfig, Recovery};
pub use pose::{PoseSE3, Trajectory};
pub use raster::{DepthMap, ImageBuffer, Label, LabelMap, MaskBuffer};
pub use tsdf::{fuse_chunk, FusionChunk, FusionFrame, FusionParams, TsdfVolume};
