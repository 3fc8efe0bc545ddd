//! `arthromap`: synthesize stereo datasets, evaluate losses, recover poses,
//! fuse TSDF maps and score trajectories.
//!
//! Settings come from one JSON config (`--config`); flags override config
//! keys, and a dataset's own `dataset.json` camera overrides both. Errors are
//! reported on stderr as `{"error": code, "message": ...}` with a per-class
//! exit code.

mod commands;
mod config;
mod dataset;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Config, DepthFormat, ScenePreset};
use crate::error::{CliError, CliResult};
use crate::output::emit;
use arthromap::mesh::PlyFormat;
use arthromap::oracle::TextureMode;

#[derive(Parser)]
#[command(name = "arthromap", version, about = "Semantic 3D mapping pipeline for stereo arthroscopy")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic stereo dataset with depth, labels and trajectory.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        scene: Option<ScenePreset>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_texture)]
        texture: Option<TextureMode>,
        #[arg(long, value_enum)]
        depth_format: Option<DepthFormat>,
    },
    /// Evaluate the training objective on dataset frames.
    Loss {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        target: usize,
        /// Temporal source frames.
        #[arg(long, value_delimiter = ',')]
        sources: Vec<usize>,
        /// Add the target's right image as a source.
        #[arg(long)]
        stereo: bool,
        /// Predicted trajectory: warp with it and add the pose term.
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover frame-to-frame poses by minimizing the objective.
    RecoverPose {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long)]
        end: Option<usize>,
        /// Use the stereo partner as an extra source with known pose.
        #[arg(long)]
        stereo: bool,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Fuse all dataset frames into a TSDF volume and extract a mesh.
    Fuse {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        voxel_size: Option<f32>,
        #[arg(long)]
        truncation: Option<f32>,
        /// Geometry only, even when label maps exist.
        #[arg(long)]
        no_labels: bool,
        #[arg(long)]
        tv_lambda: Option<f64>,
        #[arg(long, requires = "tv_lambda")]
        tv_iters: Option<usize>,
        #[arg(long)]
        ascii: bool,
    },
    /// Absolute trajectory error between two trajectory files.
    EvalAte {
        gt: PathBuf,
        est: PathBuf,
        /// Rigidly align the estimate first.
        #[arg(long)]
        align: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_texture(s: &str) -> Result<TextureMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| format!("unknown texture {s:?} (rich, low, none)"))
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth {
            out,
            scene,
            frames,
            seed,
            texture,
            depth_format,
        } => {
            let out = cfg.dataset_dir(out.as_deref())?;
            let s = &mut cfg.synth;
            s.scene = scene.unwrap_or(s.scene);
            s.frames = frames.unwrap_or(s.frames);
            s.seed = seed.unwrap_or(s.seed);
            s.texture = texture.unwrap_or(s.texture);
            s.depth_format = depth_format.unwrap_or(s.depth_format);
            emit(&commands::synth(&cfg, &out)?, None)
        }
        Command::Loss {
            dataset,
            target,
            sources,
            stereo,
            pred,
            out,
        } => {
            let ds = cfg.dataset_dir(dataset.as_deref())?;
            let report = commands::loss(&cfg, &ds, target, &sources, stereo, pred.as_deref())?;
            emit(&report, out.as_deref())
        }
        Command::RecoverPose {
            dataset,
            out,
            start,
            end,
            stereo,
            max_iters,
        } => {
            let ds = cfg.dataset_dir(dataset.as_deref())?;
            let out = cfg.output_dir(out.as_deref())?;
            cfg.optimizer.max_iters = max_iters.unwrap_or(cfg.optimizer.max_iters);
            cfg.validate()?;
            emit(&commands::recover(&cfg, &ds, start, end, stereo, &out)?, None)
        }
        Command::Fuse {
            dataset,
            out,
            voxel_size,
            truncation,
            no_labels,
            tv_lambda,
            tv_iters,
            ascii,
        } => {
            let ds = cfg.dataset_dir(dataset.as_deref())?;
            let out = cfg.output_dir(out.as_deref())?;
            let f = &mut cfg.fusion;
            f.voxel_size = voxel_size.unwrap_or(f.voxel_size);
            f.truncation = truncation.unwrap_or(f.truncation);
            f.use_labels &= !no_labels;
            if let Some(lambda) = tv_lambda {
                let iters = tv_iters.or(f.tv_l1.map(|t| t.iters)).unwrap_or(100);
                f.tv_l1 = Some(config::TvL1Config { lambda, iters });
            }
            if ascii {
                f.ply_format = PlyFormat::Ascii;
            }
            cfg.validate()?;
            emit(&commands::fuse(&cfg, &ds, &out)?, None)
        }
        Command::EvalAte { gt, est, align, out } => emit(&commands::eval_ate(&gt, &est, align)?, out.as_deref()),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::Usage(e.render().to_string().trim_end().to_owned())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
