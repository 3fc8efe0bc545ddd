use rayon::prelude::*;

use super::TsdfVolume;
use crate::error::{Error, Result};

/// Per-iteration energies; `energies[0]` is the input field.
#[derive(Clone, Debug, PartialEq)]
pub struct TvL1Report {
    pub energies: Vec<f64>,
}

impl TvL1Report {
    pub fn is_monotone(&self) -> bool {
        self.energies.windows(2).all(|w| w[1] <= w[0])
    }
}

struct Grid {
    nx: usize,
    ny: usize,
    nz: usize,
}

impl Grid {
    #[inline]
    fn coords(&self, idx: usize) -> (usize, usize, usize) {
        (idx % self.nx, (idx / self.nx) % self.ny, idx / (self.nx * self.ny))
    }

    /// Forward differences, zero on the far faces.
    #[inline]
    fn grad(&self, u: &[f64], idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords(idx);
        let sy = self.nx;
        let sz = self.nx * self.ny;
        [
            if i + 1 < self.nx { u[idx + 1] - u[idx] } else { 0.0 },
            if j + 1 < self.ny { u[idx + sy] - u[idx] } else { 0.0 },
            if k + 1 < self.nz { u[idx + sz] - u[idx] } else { 0.0 },
        ]
    }

    /// Negative adjoint of [`Grid::grad`].
    #[inline]
    fn div(&self, p: &[[f64; 3]], idx: usize) -> f64 {
        let (i, j, k) = self.coords(idx);
        let sy = self.nx;
        let sz = self.nx * self.ny;
        let mut d = 0.0;
        if i + 1 < self.nx {
            d += p[idx][0];
        }
        if i > 0 {
            d -= p[idx - 1][0];
        }
        if j + 1 < self.ny {
            d += p[idx][1];
        }
        if j > 0 {
            d -= p[idx - sy][1];
        }
        if k + 1 < self.nz {
            d += p[idx][2];
        }
        if k > 0 {
            d -= p[idx - sz][2];
        }
        d
    }
}

fn energy(grid: &Grid, u: &[f64], f: &[f64], w: &[f64], lambda: f64) -> f64 {
    (0..u.len())
        .into_par_iter()
        .map(|idx| {
            let g = grid.grad(u, idx);
            let tv = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            tv + lambda * w[idx] * (u[idx] - f[idx]).abs()
        })
        .sum()
}

/// `sum |grad u| + lambda * sum w |u - f|` for the volume's own field, with
/// `f` the field itself (so only the TV part is nonzero).
pub fn tv_l1_energy(vol: &TsdfVolume, lambda: f64) -> f64 {
    let [nx, ny, nz] = vol.dims();
    let u: Vec<f64> = vol.sdf.iter().map(|v| *v as f64).collect();
    let w: Vec<f64> = vol.weight.iter().map(|v| *v as f64).collect();
    energy(&Grid { nx, ny, nz }, &u, &u, &w, lambda)
}

/// Minimizes `sum |grad u| + lambda * sum w |u - f|` by primal-dual iteration,
/// where `f` is the fused field and `w` the fusion weight. Unobserved voxels
/// carry no data term and are filled by the TV term; weights and label counts
/// are kept.
///
/// The returned field is the lowest-energy primal iterate seen so far, so the
/// reported energy never increases.
pub fn regularize_tv_l1(vol: &TsdfVolume, lambda: f64, iters: usize) -> Result<(TsdfVolume, TvL1Report)> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let [nx, ny, nz] = vol.dims();
    let grid = Grid { nx, ny, nz };
    let n = vol.len();
    let f: Vec<f64> = vol.sdf.iter().map(|v| *v as f64).collect();
    let w: Vec<f64> = vol.weight.iter().map(|v| *v as f64).collect();
    let step = 1.0 / 12f64.sqrt();
    let (sigma, tau) = (step, step);

    let mut u = f.clone();
    let mut u_bar = f.clone();
    let mut p = vec![[0.0f64; 3]; n];
    let mut best = u.clone();
    let mut best_energy = energy(&grid, &u, &f, &w, lambda);
    let mut energies = Vec::with_capacity(iters + 1);
    energies.push(best_energy);

    for _ in 0..iters {
        p.par_iter_mut().enumerate().for_each(|(idx, pi)| {
            let g = grid.grad(&u_bar, idx);
            let q = [pi[0] + sigma * g[0], pi[1] + sigma * g[1], pi[2] + sigma * g[2]];
            let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt().max(1.0);
            *pi = [q[0] / norm, q[1] / norm, q[2] / norm];
        });
        let p_ref = &p;
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|idx| {
                let v = u[idx] + tau * grid.div(p_ref, idx);
                let shrunk = if w[idx] > 0.0 {
                    let t = tau * lambda * w[idx];
                    let d = v - f[idx];
                    f[idx] + d.signum() * (d.abs() - t).max(0.0)
                } else {
                    v
                };
                shrunk.clamp(-1.0, 1.0)
            })
            .collect();
        u_bar.par_iter_mut().enumerate().for_each(|(idx, b)| *b = 2.0 * next[idx] - u[idx]);
        u = next;
        let e = energy(&grid, &u, &f, &w, lambda);
        if e <= best_energy {
            best_energy = e;
            best.copy_from_slice(&u);
        }
        energies.push(best_energy);
    }

    let mut out = vol.clone();
    for (dst, src) in out.sdf.iter_mut().zip(&best) {
        *dst = *src as f32;
    }
    Ok((out, TvL1Report { energies }))
}
