//! Gaussian kernel density estimate with bandwidth `r` and its scores.
//!
//! Point queries are evaluated directly from the sorted samples. The score uses
//! a log-sum-exp form restricted to the samples whose kernel weight is within
//! `exp(-WINDOW_CUT)` of the largest one, which keeps it finite and accurate far
//! from the data.
//!
//! Bulk consumers (the Fisher information estimate and the Newton step) query the
//! score at hundreds of thousands of points. [`ScoreTable`] serves those: it
//! tabulates the raw score with its first two derivatives and interpolates with
//! quintic Hermite polynomials, refining every interval until the clipped
//! interpolant agrees with a direct evaluation at its midpoint.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{exp, ln, sqrt, CompensatedSum, FRAC_1_SQRT_2PI, SQRT_2PI};

/// Kernels lighter than `exp(-WINDOW_CUT)` times the nearest one are skipped in
/// score evaluations.
const WINDOW_CUT: f64 = 40.0;
const UNDERFLOW_LOG: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// `T = (2/r) sqrt(log(N / log(1/delta)))`.
pub fn clip_threshold(n: usize, delta: f64, r: f64) -> Result<f64> {
    let invalid = Error::InvalidClipParams { n, delta, r };
    if !(delta > 0.0 && delta <= 0.5) || !(r > 0.0 && r.is_finite()) {
        return Err(invalid);
    }
    let log_inv = ln(1.0 / delta);
    if !(n as f64 > log_inv) {
        return Err(invalid);
    }
    Ok(2.0 / r * sqrt(ln(n as f64 / log_inv)))
}

/// Anything that can play the role of the symmetrized clipped score.
pub trait SymmetrizedScore {
    /// Symmetrization point.
    fn center(&self) -> f64;
    fn threshold(&self) -> f64;
    fn bandwidth(&self) -> f64;
    /// Clipped score at `x >= center()`.
    fn clipped_right(&self, x: f64) -> f64;

    /// `s_clip(x)` for `x >= center`, `-s_clip(2 center - x)` otherwise.
    fn symmetrized(&self, x: f64) -> f64 {
        let c = self.center();
        if x >= c {
            self.clipped_right(x)
        } else {
            -self.clipped_right(2.0 * c - x)
        }
    }
}

/// Score and its first two derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreDerivatives {
    pub score: f64,
    pub d1: f64,
    pub d2: f64,
    /// `ln f_hat(x)`.
    pub log_density: f64,
    /// Rough bound on the rounding error of `score`.
    pub noise: f64,
}

/// Serializable summary of a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeSummary {
    pub n: usize,
    pub r: f64,
    pub delta: f64,
    pub threshold: f64,
    pub sym_point: Option<f64>,
}

/// A fitted kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    samples: Vec<f64>,
    r: f64,
    delta: f64,
    threshold: f64,
    sym_point: Option<f64>,
}

impl KdeModel {
    /// Fits on `samples` with bandwidth `r`; the clip threshold is derived from
    /// `(N, delta, r)`.
    pub fn fit(samples: &[f64], r: f64, delta: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("samples must be finite".into()));
        }
        let threshold = clip_threshold(samples.len(), delta, r)?;
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { samples: sorted, r, delta, threshold, sym_point: None })
    }

    /// Replaces the clip threshold. `f64::INFINITY` disables clipping.
    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "clip threshold must be positive, got {threshold}"
            )));
        }
        self.threshold = threshold;
        Ok(self)
    }

    /// Disables clipping (`T = inf`).
    pub fn without_clipping(mut self) -> Self {
        self.threshold = f64::INFINITY;
        self
    }

    pub fn with_sym_point(mut self, mu_1: f64) -> Result<Self> {
        if !mu_1.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("sym point must be finite, got {mu_1}")));
        }
        self.sym_point = Some(mu_1);
        Ok(self)
    }

    /// Samples in ascending order.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn sym_point(&self) -> Option<f64> {
        self.sym_point
    }

    pub fn summary(&self) -> KdeSummary {
        KdeSummary {
            n: self.len(),
            r: self.r,
            delta: self.delta,
            threshold: self.threshold,
            sym_point: self.sym_point,
        }
    }

    /// `(1/N) sum_i w_r(x - Y_i)`, summed over every sample.
    pub fn pdf(&self, x: f64) -> f64 {
        let r = self.r;
        let acc: CompensatedSum = self
            .samples
            .iter()
            .map(|&y| {
                let z = (x - y) / r;
                exp(-0.5 * z * z)
            })
            .collect();
        acc.value() * FRAC_1_SQRT_2PI / (r * self.len() as f64)
    }

    /// `(1/N) sum_i w_r'(x - Y_i)` with `w_r'(t) = -(t / r^2) w_r(t)`.
    pub fn pdf_derivative(&self, x: f64) -> f64 {
        let r = self.r;
        let acc: CompensatedSum = self
            .samples
            .iter()
            .map(|&y| {
                let z = (x - y) / r;
                -z * exp(-0.5 * z * z)
            })
            .collect();
        acc.value() * FRAC_1_SQRT_2PI / (r * r * self.len() as f64)
    }

    /// Index range of the samples that matter for score queries at `x`, and the
    /// squared standardized distance to the nearest sample.
    fn window(&self, x: f64) -> (usize, usize, f64) {
        let ys = &self.samples;
        let k = ys.partition_point(|&y| y < x);
        let mut dmin = f64::INFINITY;
        if k < ys.len() {
            dmin = ys[k] - x;
        }
        if k > 0 {
            dmin = dmin.min(x - ys[k - 1]);
        }
        let umin = dmin / self.r;
        let reach = self.r * sqrt(umin * umin + 2.0 * WINDOW_CUT);
        let lo = ys.partition_point(|&y| y < x - reach);
        let hi = ys.partition_point(|&y| y <= x + reach);
        (lo, hi.max(lo + 1).min(ys.len()), umin * umin)
    }

    /// Score, its derivatives and the log-density from the posterior moments of
    /// `u = (Y - x) / r` under weights proportional to `w_r(x - Y)`.
    pub fn score_derivatives(&self, x: f64) -> ScoreDerivatives {
        let r = self.r;
        let (lo, hi, umin2) = self.window(x);
        let window = &self.samples[lo..hi];
        // shift by the nearest sample so far-field moments do not cancel
        let k = window.partition_point(|&y| y < x);
        let anchor = if k == 0 {
            window[0]
        } else if k == window.len() || x - window[k - 1] <= window[k] - x {
            window[k - 1]
        } else {
            window[k]
        };
        let u0 = (anchor - x) / r;
        let mut s0 = CompensatedSum::new();
        let mut s1 = CompensatedSum::new();
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for &y in window {
            let u = (y - x) / r;
            let w = exp(-0.5 * (u * u - umin2));
            let v = u - u0;
            s0.add(w);
            s1.add(w * v);
            s2 += w * v * v;
            s3 += w * v * v * v;
        }
        let total = s0.value();
        let m = s1.value() / total;
        let e2 = s2 / total;
        let e3 = s3 / total;
        let var = (e2 - m * m).max(0.0);
        let k3 = e3 - 3.0 * m * e2 + 2.0 * m * m * m;
        let log_density = ln(total) - 0.5 * umin2 - ln(self.len() as f64) - ln(SQRT_2PI * r);
        // Exponents of size `big^2` carry relative error ~eps, which moves the
        // posterior mean by up to `big^2 * sd(u)` in units of `1/r`.
        let sd = sqrt(var);
        let big = u0.abs() + m.abs() + sd + 1.0;
        let noise = 4.0 * f64::EPSILON * (big * big * sd + big) / r;
        ScoreDerivatives {
            score: (u0 + m) / r,
            d1: (var - 1.0) / (r * r),
            d2: k3 / (r * r * r),
            log_density,
            noise,
        }
    }

    /// `f_hat'(x) / f_hat(x)` without the underflow guard. Always finite.
    pub fn raw_score(&self, x: f64) -> f64 {
        self.score_derivatives(x).score
    }

    /// `f_hat'(x) / f_hat(x)`.
    pub fn score(&self, x: f64) -> Result<f64> {
        let d = self.score_derivatives(x);
        if d.log_density < UNDERFLOW_LOG {
            return Err(Error::DensityUnderflow { x, density: exp(d.log_density) });
        }
        Ok(d.score)
    }

    /// `sign(s) min(|s|, T)`.
    ///
    /// Evaluated through the log-sum-exp score, so it is defined even where the
    /// density underflows; there it saturates at `+-T`.
    pub fn clipped_score(&self, x: f64) -> f64 {
        self.raw_score(x).clamp(-self.threshold, self.threshold)
    }

    /// Symmetrized clipped score about `mu_1`.
    pub fn symmetrized_score(&self, x: f64) -> Result<f64> {
        Ok(self.direct()?.symmetrized(x))
    }

    /// Direct-evaluation view implementing [`SymmetrizedScore`].
    pub fn direct(&self) -> Result<DirectScore<'_>> {
        let center = self.sym_point.ok_or(Error::SymPointUnset)?;
        Ok(DirectScore { kde: self, center })
    }

    /// Tabulated symmetrized score covering every query the estimator makes.
    pub fn score_table(&self) -> Result<ScoreTable<'_>> {
        ScoreTable::symmetric(self)
    }
}

/// [`SymmetrizedScore`] by direct evaluation.
#[derive(Debug, Clone, Copy)]
pub struct DirectScore<'a> {
    kde: &'a KdeModel,
    center: f64,
}

impl SymmetrizedScore for DirectScore<'_> {
    fn center(&self) -> f64 {
        self.center
    }
    fn threshold(&self) -> f64 {
        self.kde.threshold
    }
    fn bandwidth(&self) -> f64 {
        self.kde.r
    }
    fn clipped_right(&self, x: f64) -> f64 {
        self.kde.clipped_score(x)
    }
}

/// Refinement settings for [`ScoreTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableTolerance {
    /// Absolute tolerance, in units of `1/r`.
    pub abs: f64,
    /// Relative tolerance on the clipped value.
    pub rel: f64,
    /// Initial node spacing, in units of `r`.
    pub initial_spacing: f64,
    /// Intervals narrower than `r * 2^-max_depth` are accepted as is.
    ///
    /// The acceptance test also allows the estimated rounding error of the
    /// direct evaluation, so refinement does not chase noise.
    pub max_depth: u32,
}

impl Default for TableTolerance {
    fn default() -> Self {
        Self { abs: 1e-11, rel: 1e-12, initial_spacing: 0.5, max_depth: 30 }
    }
}

/// Build statistics of a [`ScoreTable`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub nodes: usize,
    pub direct_evaluations: usize,
    /// Largest midpoint discrepancy among accepted intervals.
    pub max_midpoint_error: f64,
    /// Intervals accepted only because they hit the depth limit.
    pub forced: usize,
}

/// Quintic Hermite interpolant of the raw KDE score on `[lo, hi]`.
///
/// Queries outside the range fall back to direct evaluation.
#[derive(Debug, Clone)]
pub struct ScoreTable<'a> {
    kde: &'a KdeModel,
    center: f64,
    nodes: Vec<f64>,
    values: Vec<[f64; 3]>,
    stats: TableStats,
}

#[inline]
fn hermite5(h: f64, t: f64, left: &[f64; 3], right: &[f64; 3]) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    left[0] * h0
        + h * left[1] * h1
        + h * h * left[2] * h2
        + h * h * right[2] * h3
        + h * right[1] * h4
        + right[0] * h5
}

impl<'a> ScoreTable<'a> {
    /// Table over `[lo, hi]` with default tolerances.
    pub fn build(kde: &'a KdeModel, lo: f64, hi: f64) -> Self {
        Self::build_with(kde, lo, hi, TableTolerance::default())
    }

    pub fn build_with(kde: &'a KdeModel, lo: f64, hi: f64, tol: TableTolerance) -> Self {
        let r = kde.r;
        let center = kde.sym_point.unwrap_or(f64::NAN);
        let threshold = kde.threshold;
        let clip = |v: f64| v.clamp(-threshold, threshold);
        let direct = |x: f64| {
            let d = kde.score_derivatives(x);
            ([d.score, d.d1, d.d2], d.noise)
        };
        let mut stats = TableStats::default();
        let hi = if hi > lo { hi } else { lo + r };
        let count = crate::math::ceil((hi - lo) / (tol.initial_spacing * r)).max(1.0) as usize;
        let step = (hi - lo) / count as f64;
        let grid: Vec<f64> =
            (0..=count).map(|i| if i == count { hi } else { lo + i as f64 * step }).collect();
        let mut nodes = Vec::with_capacity(grid.len() * 2);
        let mut values = Vec::with_capacity(grid.len() * 2);
        let min_width = r * libm::ldexp(1.0, -(tol.max_depth as i32));
        let (first, _) = direct(grid[0]);
        stats.direct_evaluations += 1;
        nodes.push(grid[0]);
        values.push(first);
        // depth-first over intervals, left before right, so nodes come out sorted
        let mut stack: Vec<(f64, [f64; 3], f64, [f64; 3])> = Vec::new();
        let mut left_val = first;
        for pair in grid.windows(2) {
            let (right_val, _) = direct(pair[1]);
            stats.direct_evaluations += 1;
            stack.push((pair[0], left_val, pair[1], right_val));
            while let Some((a, va, b, vb)) = stack.pop() {
                let m = 0.5 * (a + b);
                let (vm, noise) = direct(m);
                stats.direct_evaluations += 1;
                let approx = hermite5(b - a, 0.5, &va, &vb);
                let exact = clip(vm[0]);
                let err = (clip(approx) - exact).abs();
                let allowed = tol.abs / r + tol.rel * exact.abs() + noise;
                let narrow = b - a <= min_width || !(m > a && m < b);
                if err <= allowed || narrow {
                    if narrow && err > allowed {
                        stats.forced += 1;
                    }
                    stats.max_midpoint_error = stats.max_midpoint_error.max(err);
                    nodes.push(b);
                    values.push(vb);
                } else {
                    stack.push((m, vm, b, vb));
                    stack.push((a, va, m, vm));
                }
            }
            left_val = right_val;
        }
        stats.nodes = nodes.len();
        Self { kde, center, nodes, values, stats }
    }

    /// Table covering `[mu_1, R]`, where `R` reaches past every sample and every
    /// reflected sample by `12 r`.
    pub fn symmetric(kde: &'a KdeModel) -> Result<Self> {
        let center = kde.sym_point.ok_or(Error::SymPointUnset)?;
        let ys = kde.samples();
        let far = (ys[ys.len() - 1] - center).max(center - ys[0]).max(0.0);
        Ok(Self::build(kde, center, center + far + 12.0 * kde.r))
    }

    pub fn kde(&self) -> &'a KdeModel {
        self.kde
    }

    pub fn range(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn stats(&self) -> TableStats {
        self.stats
    }

    /// Interpolated raw score; direct evaluation outside the table range.
    pub fn raw(&self, x: f64) -> f64 {
        let (lo, hi) = self.range();
        if !(x >= lo && x <= hi) {
            return self.kde.raw_score(x);
        }
        let j = self.nodes.partition_point(|&n| n <= x).clamp(1, self.nodes.len() - 1) - 1;
        let (a, b) = (self.nodes[j], self.nodes[j + 1]);
        let h = b - a;
        hermite5(h, (x - a) / h, &self.values[j], &self.values[j + 1])
    }

    pub fn clipped(&self, x: f64) -> f64 {
        let t = self.kde.threshold;
        self.raw(x).clamp(-t, t)
    }

    /// Points in the table range where the interpolated `|score|` crosses `T`,
    /// located by bisection on the interpolant.
    pub fn clip_crossings(&self) -> Vec<f64> {
        let t = self.kde.threshold;
        let mut out = Vec::new();
        if !t.is_finite() {
            return out;
        }
        let excess = |v: &[f64; 3]| v[0].abs() - t;
        for j in 0..self.nodes.len() - 1 {
            let (ea, eb) = (excess(&self.values[j]), excess(&self.values[j + 1]));
            if (ea > 0.0) == (eb > 0.0) {
                continue;
            }
            let (mut a, mut b) = (self.nodes[j], self.nodes[j + 1]);
            let h = b - a;
            let f =
                |x: f64| hermite5(h, (x - self.nodes[j]) / h, &self.values[j], &self.values[j + 1]).abs() - t;
            let fa_pos = ea > 0.0;
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if !(m > a && m < b) {
                    break;
                }
                if (f(m) > 0.0) == fa_pos {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        out
    }
}

impl SymmetrizedScore for ScoreTable<'_> {
    fn center(&self) -> f64 {
        self.center
    }
    fn threshold(&self) -> f64 {
        self.kde.threshold
    }
    fn bandwidth(&self) -> f64 {
        self.kde.r
    }
    fn clipped_right(&self, x: f64) -> f64 {
        self.clipped(x)
    }
}
