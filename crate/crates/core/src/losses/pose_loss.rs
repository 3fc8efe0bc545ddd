use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::LossConfig;
use crate::pose::PoseSE3;

/// The four pose-supervision terms; `total` is their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseLossBreakdown {
    /// Weighted L1 between unit-normalized translations.
    pub trl_normalized: f64,
    /// Weighted L1 between raw translations.
    pub trl_raw: f64,
    /// L1 between unit-normalized Euler vectors.
    pub ang_normalized: f64,
    /// L1 between raw Euler vectors.
    pub ang_raw: f64,
    pub total: f64,
}

fn weighted_l1(a: &Vector3<f64>, b: &Vector3<f64>, w: &[f64; 3]) -> f64 {
    (0..3).map(|i| w[i] * (a[i] - b[i]).abs()).sum()
}

/// L1 between unit vectors; skipped (0) when either norm is below `eps`.
fn normalized_l1(a: &Vector3<f64>, b: &Vector3<f64>, w: &[f64; 3], eps: f64) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na < eps || nb < eps || na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    weighted_l1(&(a / na), &(b / nb), w)
}

/// Supervised pose loss between ground-truth and predicted relative motion.
///
/// Translation terms carry `cfg.trl_weights` per axis; rotation terms are
/// unweighted. Normalized terms make small motions count as much as large ones.
pub fn pose_loss(gt: &PoseSE3, pred: &PoseSE3, cfg: &LossConfig) -> (f64, PoseLossBreakdown) {
    let ones = [1.0; 3];
    let (t, tp) = (gt.translation(), pred.translation());
    let (r, rp) = (Vector3::from(gt.rot), Vector3::from(pred.rot));
    let b = PoseLossBreakdown {
        trl_normalized: normalized_l1(&t, &tp, &cfg.trl_weights, cfg.norm_epsilon),
        trl_raw: weighted_l1(&t, &tp, &cfg.trl_weights),
        ang_normalized: normalized_l1(&r, &rp, &ones, cfg.norm_epsilon),
        ang_raw: weighted_l1(&r, &rp, &ones),
        total: 0.0,
    };
    let total = b.trl_normalized + b.trl_raw + b.ang_normalized + b.ang_raw;
    (total, PoseLossBreakdown { total, ..b })
}
