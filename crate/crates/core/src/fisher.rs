//! Plug-in Fisher information `E_{x ~ f_hat}[s_sym(x)^2]`.
//!
//! The expectation over the KDE is a sum of Gaussian integrals, one per kernel.
//! Kernels whose `+-8r` neighbourhood is free of kinks of the integrand use
//! Gauss-Hermite; the others are split at the kinks (the symmetrization point,
//! the clip crossings and their reflections) and integrated piecewise with
//! Gauss-Legendre.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kde::{KdeModel, ScoreTable, SymmetrizedScore};
use crate::math::{normal_pdf, normal_sf, CompensatedSum};
use crate::quadrature::{GaussHermite, GaussLegendre};

/// Quadrature settings for [`estimate_fisher_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherConfig {
    /// Nodes per kernel (Gauss-Hermite) or per sub-piece (Gauss-Legendre).
    pub hermite_nodes: usize,
    /// Half-width, in units of `r`, of the neighbourhood searched for kinks.
    pub split_halfwidth: f64,
}

impl Default for FisherConfig {
    fn default() -> Self {
        Self { hermite_nodes: 61, split_halfwidth: 8.0 }
    }
}

/// The estimate `I_hat_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherEstimate {
    #[serde(rename = "fisher_estimate")]
    pub value: f64,
    /// Number of integrand evaluations.
    pub quadrature_nodes: usize,
    /// Bound on the integrand mass dropped outside `+-8r` of split kernels.
    pub tail_bound: f64,
}

impl FisherEstimate {
    /// An estimate with a given value, e.g. from an oracle.
    pub fn from_value(value: f64) -> Self {
        Self { value, quadrature_nodes: 0, tail_bound: 0.0 }
    }
}

/// `I_hat_r` with default settings, via the model's score table.
pub fn estimate_fisher(kde: &KdeModel) -> Result<FisherEstimate> {
    let table = kde.score_table()?;
    estimate_fisher_with(&table, &FisherConfig::default())
}

/// `I_hat_r` for a prepared score table.
pub fn estimate_fisher_with(table: &ScoreTable<'_>, cfg: &FisherConfig) -> Result<FisherEstimate> {
    let kde = table.kde();
    let center = kde.sym_point().ok_or(Error::SymPointUnset)?;
    if cfg.hermite_nodes == 0 || !(cfg.split_halfwidth > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!("invalid Fisher config {cfg:?}")));
    }
    let r = kde.r();
    let t = kde.threshold();
    let mut breaks: Vec<f64> = alloc::vec![center];
    for c in table.clip_crossings() {
        breaks.push(c);
        breaks.push(2.0 * center - c);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let hermite = GaussHermite::new(cfg.hermite_nodes);
    let legendre = GaussLegendre::new(cfg.hermite_nodes);
    let half = cfg.split_halfwidth * r;
    let outside = 2.0 * normal_sf(cfg.split_halfwidth);
    let ys = kde.samples();
    let (ymin, ymax) = (ys[0], ys[ys.len() - 1]);

    let mut total = CompensatedSum::new();
    let mut tail = CompensatedSum::new();
    let mut evaluations = 0usize;
    let mut pieces: Vec<f64> = Vec::new();
    for &y in ys {
        let (lo, hi) = (y - half, y + half);
        let first = breaks.partition_point(|&b| b <= lo);
        let last = breaks.partition_point(|&b| b < hi);
        if first == last {
            total.add(hermite.expectation(|z| {
                let s = table.symmetrized(y + r * z);
                s * s
            }));
            evaluations += hermite.len();
            continue;
        }
        pieces.clear();
        pieces.push(lo);
        pieces.extend_from_slice(&breaks[first..last]);
        pieces.push(hi);
        let mut kernel = CompensatedSum::new();
        for w in pieces.windows(2) {
            kernel.add(legendre.integrate(w[0], w[1], |x| {
                let s = table.symmetrized(x);
                normal_pdf((x - y) / r) / r * s * s
            }));
            evaluations += legendre.len();
        }
        total.add(kernel.value());
        tail.add(if t.is_finite() {
            t * t * outside
        } else {
            unclipped_tail(y, center, ymin, ymax, r, cfg.split_halfwidth)
        });
    }
    let n = ys.len() as f64;
    let mut value = total.value() / n;
    if t.is_finite() {
        value = value.min(t * t);
    }
    Ok(FisherEstimate { value, quadrature_nodes: evaluations, tail_bound: tail.value() / n })
}

/// Bound on `int_{|z| > c} s_sym(y + r z)^2 phi(z) dz` without clipping.
///
/// The raw score at `x'` is a weighted average of `(Y_j - x') / r^2`, so it is at
/// most `(D + r|z|) / r^2` with `D` the largest distance from a sample to `y` or
/// its reflection. Then `(D + r|z|)^2 <= 2 D^2 + 2 r^2 z^2`.
fn unclipped_tail(y: f64, center: f64, ymin: f64, ymax: f64, r: f64, c: f64) -> f64 {
    let mirror = 2.0 * center - y;
    let d = [ymax - y, y - ymin, ymax - mirror, mirror - ymin]
        .into_iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let p = 2.0 * normal_sf(c);
    let second = 2.0 * (c * normal_pdf(c)) + p;
    (2.0 * d * d * p + 2.0 * r * r * second) / (r * r * r * r)
}
