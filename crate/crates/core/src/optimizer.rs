//! Relative-pose recovery by minimizing the self-supervised objective with
//! finite-difference gradients and a backtracking line search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::losses::{photometric, smoothness_with, LossConfig};
use crate::pose::PoseSE3;
use crate::raster::{DepthMap, ImageBuffer};
use crate::warp::synthesize_target_with;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Central-difference step for the Euler angles, radians.
    pub fd_step_rot: f64,
    /// Central-difference step for the translation, mm.
    pub fd_step_trl: f64,
    pub armijo_c: f64,
    /// First trial step of each line search. The first iteration moves along
    /// the unit gradient direction, so this is in mm there.
    pub init_step: f64,
    pub tol_loss: f64,
    /// BFGS directions instead of plain steepest descent.
    pub quasi_newton: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 200,
            fd_step_rot: 1e-4,
            fd_step_trl: 1e-3,
            armijo_c: 1e-4,
            init_step: 1.0,
            tol_loss: 1e-10,
            quasi_newton: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.fd_step_rot, self.fd_step_trl, self.armijo_c, self.init_step, self.tol_loss];
        if self.max_iters == 0 || positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain("optimizer settings must be positive".into()));
        }
        if self.armijo_c >= 1.0 {
            return Err(Error::Domain("armijo_c must be below 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Loss decrease fell below `tol_loss`, or no descent step was found.
    Converged,
    /// The loss does not respond to the pose: nothing to descend.
    FlatLoss,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub pose: PoseSE3,
    pub status: Status,
    pub iterations: usize,
    pub evaluations: usize,
    /// Loss at the start and after every accepted step.
    pub trace: Vec<f64>,
}

impl Recovery {
    pub fn initial_loss(&self) -> f64 {
        self.trace[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

/// A target frame, one source whose pose is unknown, and any number of
/// sources with known poses (such as the stereo partner).
#[derive(Clone, Debug)]
pub struct PoseProblem {
    pub target: ImageBuffer,
    pub source: ImageBuffer,
    pub fixed: Vec<(ImageBuffer, PoseSE3)>,
    pub depth: DepthMap,
    pub k: Intrinsics,
}

/// The self-supervised objective with everything that does not depend on the
/// free pose evaluated once.
struct Objective<'a> {
    problem: &'a PoseProblem,
    cfg: &'a LossConfig,
    raw_min: Vec<f64>,
    fixed_min: Vec<Option<f64>>,
    smooth: f64,
}

impl<'a> Objective<'a> {
    fn new(problem: &'a PoseProblem, cfg: &'a LossConfig) -> Result<Self> {
        let n = problem.target.width() * problem.target.height();
        let mut raw_min = photometric(&problem.target, &problem.source, cfg)?.data;
        let mut fixed_min: Vec<Option<f64>> = vec![None; n];
        for (img, pose) in &problem.fixed {
            let raw = photometric(&problem.target, img, cfg)?;
            for (m, r) in raw_min.iter_mut().zip(&raw.data) {
                if *r < *m {
                    *m = *r;
                }
            }
            let (synth, mask) = synthesize_target_with(img, &problem.depth, pose, &problem.k, cfg.sample_mode)?;
            let p = photometric(&problem.target, &synth, cfg)?;
            for i in 0..n {
                if mask.data()[i] && fixed_min[i].is_none_or(|b| p.data[i] < b) {
                    fixed_min[i] = Some(p.data[i]);
                }
            }
        }
        let smooth = if cfg.lambda_smoo > 0.0 {
            smoothness_with(&problem.depth, &problem.target, cfg.smooth_disparity)?
        } else {
            0.0
        };
        Ok(Objective {
            problem,
            cfg,
            raw_min,
            fixed_min,
            smooth,
        })
    }

    /// Loss and the number of pixels that contributed.
    fn eval(&self, pose: &PoseSE3) -> Result<(f64, usize)> {
        let p = self.problem;
        let (synth, mask) = synthesize_target_with(&p.source, &p.depth, pose, &p.k, self.cfg.sample_mode)?;
        let free = photometric(&p.target, &synth, self.cfg)?;
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..free.data.len() {
            let own = mask.data()[i].then_some(free.data[i]);
            let best = match (own, self.fixed_min[i]) {
                (Some(a), Some(b)) => Some(if b < a { b } else { a }),
                (a, b) => a.or(b),
            };
            let Some(best) = best else { continue };
            if !self.cfg.automask || self.raw_min[i] > best {
                sum += best;
                count += 1;
            }
        }
        let photo = if count == 0 { 0.0 } else { sum / count as f64 };
        Ok((photo + self.cfg.lambda_smoo * self.smooth, count))
    }
}

/// Recovers the target-to-source pose of a single source frame.
pub fn recover_pose(
    target: &ImageBuffer,
    source: &ImageBuffer,
    depth: &DepthMap,
    k: &Intrinsics,
    init: &PoseSE3,
    cfg: &LossConfig,
    opt: &OptimizerConfig,
) -> Result<Recovery> {
    let problem = PoseProblem {
        target: target.clone(),
        source: source.clone(),
        fixed: Vec::new(),
        depth: depth.clone(),
        k: *k,
    };
    recover_pose_with(&problem, init, cfg, opt)
}

/// Minimizes the self-supervised loss over the free source's pose. Never
/// fails for lack of convergence: the best pose found is returned with its
/// status. The trace is non-increasing.
pub fn recover_pose_with(problem: &PoseProblem, init: &PoseSE3, cfg: &LossConfig, opt: &OptimizerConfig) -> Result<Recovery> {
    cfg.validate()?;
    opt.validate()?;
    if !init.is_finite() {
        return Err(Error::Domain("initial pose must be finite".into()));
    }
    let depth = &problem.depth;
    let total = depth.width() * depth.height();
    if depth.valid_count() * 10 < total {
        return Err(Error::DegenerateDepth(format!(
            "{} of {total} depth pixels are valid, need at least 10%",
            depth.valid_count()
        )));
    }
    for (img, _) in &problem.fixed {
        if !img.same_shape(&problem.target) {
            return Err(Error::dims("fixed source does not match target"));
        }
    }
    if !problem.source.same_shape(&problem.target) {
        return Err(Error::dims("source does not match target"));
    }

    let objective = Objective::new(problem, cfg)?;
    let eval = |x: &[f64; 6]| -> Result<f64> { objective.eval(&PoseSE3::from_params(x)).map(|(l, _)| l) };
    let h = [opt.fd_step_rot, opt.fd_step_rot, opt.fd_step_rot, opt.fd_step_trl, opt.fd_step_trl, opt.fd_step_trl];
    let gradient = |x: &[f64; 6]| -> Result<[f64; 6]> {
        let parts = (0..12)
            .into_par_iter()
            .map(|n| {
                let mut y = *x;
                y[n / 2] += if n % 2 == 0 { h[n / 2] } else { -h[n / 2] };
                eval(&y)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok([0, 1, 2, 3, 4, 5].map(|a| (parts[2 * a] - parts[2 * a + 1]) / (2.0 * h[a])))
    };

    // Search directions are formed in a chart where rotations are scaled by
    // the mean scene depth, so both parameter groups are in mm.
    let depth_scale = depth.mean_valid().unwrap_or(1.0).max(1e-6);
    let scale = [depth_scale, depth_scale, depth_scale, 1.0, 1.0, 1.0];
    let to_chart = |v: &[f64; 6]| -> [f64; 6] { std::array::from_fn(|a| v[a] / scale[a]) };

    let mut x = init.to_params();
    let mut f = eval(&x)?;
    let mut evaluations = 1;
    let mut trace = vec![f];
    let mut g = gradient(&x)?;
    evaluations += 12;
    let mut hinv: Option<[[f64; 6]; 6]> = None;
    let mut status = Status::MaxIters;
    let mut iterations = 0;

    if norm(&g) == 0.0 || objective.eval(&PoseSE3::from_params(&x))?.1 == 0 {
        status = Status::FlatLoss;
    }
    while status == Status::MaxIters && iterations < opt.max_iters {
        iterations += 1;
        let gz = to_chart(&g);
        let steepest = || {
            let n = norm(&gz);
            gz.map(|v| -v / n)
        };
        let mut dz = match (&hinv, opt.quasi_newton) {
            (Some(hm), true) => mat_vec(hm, &gz).map(|v| -v),
            _ => steepest(),
        };
        if !(dot(&gz, &dz) < 0.0) {
            dz = steepest();
            hinv = None;
        }
        let slope = dot(&gz, &dz);
        let d = to_chart(&dz);
        let mut alpha = opt.init_step;
        let mut accepted = None;
        while alpha * norm(&dz) > 1e-9 {
            let y: [f64; 6] = std::array::from_fn(|a| x[a] + alpha * d[a]);
            let fy = eval(&y)?;
            evaluations += 1;
            if fy <= f + opt.armijo_c * alpha * slope {
                accepted = Some((y, fy));
                break;
            }
            alpha *= 0.5;
        }
        let Some((y, fy)) = accepted else {
            status = Status::Converged;
            break;
        };
        let gy = gradient(&y)?;
        evaluations += 12;
        let sz: [f64; 6] = std::array::from_fn(|a| (y[a] - x[a]) * scale[a]);
        let yz: [f64; 6] = std::array::from_fn(|a| (gy[a] - g[a]) / scale[a]);
        hinv = bfgs_update(hinv, &sz, &yz);
        let decrease = f - fy;
        x = y;
        f = fy;
        g = gy;
        trace.push(f);
        if decrease < opt.tol_loss {
            status = Status::Converged;
        }
    }

    Ok(Recovery {
        pose: PoseSE3::from_params(&x),
        status,
        iterations,
        evaluations,
        trace,
    })
}

fn dot(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64; 6]) -> f64 {
    dot(a, a).sqrt()
}

fn mat_vec(m: &[[f64; 6]; 6], v: &[f64; 6]) -> [f64; 6] {
    std::array::from_fn(|r| dot(&m[r], v))
}

/// Inverse-Hessian update; skipped when the curvature condition fails.
fn bfgs_update(h: Option<[[f64; 6]; 6]>, s: &[f64; 6], y: &[f64; 6]) -> Option<[[f64; 6]; 6]> {
    let sy = dot(s, y);
    if !(sy > 1e-12 * norm(s) * norm(y)) {
        return h;
    }
    let h = h.unwrap_or_else(|| {
        let scale = sy / dot(y, y);
        std::array::from_fn(|r| std::array::from_fn(|c| if r == c { scale } else { 0.0 }))
    });
    let rho = 1.0 / sy;
    let hy = mat_vec(&h, y);
    let yhy = dot(y, &hy);
    Some(std::array::from_fn(|r| {
        std::array::from_fn(|c| {
            h[r][c] - rho * (hy[r] * s[c] + s[r] * hy[c]) + (rho * rho * yhy + rho) * s[r] * s[c]
        })
    }))
}
