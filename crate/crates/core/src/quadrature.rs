//! Gauss rules and a globally adaptive composite Gauss-Legendre integrator.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::{sqrt, CompensatedSum};

/// An `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are Legendre roots found by Newton iteration from Chebyshev-like guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, z);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = CompensatedSum::new();
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(mid + half * t));
        }
        half * acc.value()
    }

    /// The nodes mapped to `[a, b]`.
    pub fn mapped_nodes(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().map(move |t| mid + half * t)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// An `n`-point Gauss-Hermite rule for the standard normal weight:
/// `E[g(Z)] ~= sum_k weights[k] * g(nodes[k])` with `Z ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Roots of the physicists' Hermite polynomial by Newton iteration on the
    /// orthonormal recurrence, rescaled to the probabilists' weight.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let pim4 = 0.751_125_544_464_942_5; // pi^(-1/4)
        let nf = n as f64;
        let mut x = alloc::vec![0.0; n];
        let mut w = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => sqrt(2.0 * nf + 1.0) - 1.855_75 * libm::pow(2.0 * nf + 1.0, -0.166_67),
                1 => z - 1.14 * libm::pow(nf, 0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * sqrt(2.0 / (jf + 1.0)) * p2 - sqrt(jf / (jf + 1.0)) * p3;
                }
                pp = sqrt(2.0 * nf) * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        let inv_sqrt_pi = 1.0 / sqrt(PI);
        let nodes: Vec<f64> = x.iter().rev().map(|v| v * core::f64::consts::SQRT_2).collect();
        let mut weights: Vec<f64> = w.iter().rev().map(|v| v * inv_sqrt_pi).collect();
        let total: f64 = weights.iter().copied().collect::<CompensatedSum>().value();
        for v in &mut weights {
            *v /= total;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[g(Z)]` for `Z ~ N(0, 1)`.
    pub fn expectation(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * g(*t));
        }
        acc.value()
    }
}

/// Tolerances and limits for [`AdaptiveIntegrator`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-9, rel_tol: 1e-11, max_panels: 1 << 20 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    error: f64,
    index: usize,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then(other.index.cmp(&self.index))
    }
}

/// Result of an adaptive integration, including the final partition.
#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    panels: Vec<(f64, f64)>,
}

impl AdaptiveOutcome {
    /// Final panels, sorted by left endpoint.
    pub fn panels(&self) -> &[(f64, f64)] {
        &self.panels
    }
}

/// Globally adaptive composite Gauss-Legendre quadrature.
///
/// Each panel is integrated once as a whole and once as two halves; the
/// difference is its error estimate and the halves are kept as its value. The
/// panel with the largest error is bisected until the summed error drops below
/// `max(abs_tol, rel_tol * |value|)`.
#[derive(Debug, Clone)]
pub struct AdaptiveIntegrator {
    rule: GaussLegendre,
    config: AdaptiveConfig,
}

impl AdaptiveIntegrator {
    pub fn new(nodes_per_panel: usize, config: AdaptiveConfig) -> Self {
        Self { rule: GaussLegendre::new(nodes_per_panel), config }
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    /// Integrates `f` over the union of the panels delimited by consecutive
    /// `breakpoints` (which must be sorted).
    pub fn integrate(&self, breakpoints: &[f64], mut f: impl FnMut(f64) -> f64) -> Result<AdaptiveOutcome> {
        let mut panels: Vec<Panel> = Vec::with_capacity(breakpoints.len());
        let mut heap = BinaryHeap::new();
        let mut evaluations = 0usize;
        for pair in breakpoints.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let whole = self.rule.integrate(a, b, &mut f);
            let m = 0.5 * (a + b);
            let left = self.rule.integrate(a, m, &mut f);
            let right = self.rule.integrate(m, b, &mut f);
            evaluations += 3 * self.rule.len();
            let error = (left + right - whole).abs();
            heap.push(HeapEntry { error, index: panels.len() });
            panels.push(Panel { a, b, left, right, error });
        }
        let total = |panels: &[Panel]| -> (f64, f64) {
            let mut v = CompensatedSum::new();
            let mut e = CompensatedSum::new();
            for p in panels {
                v.add(p.left);
                v.add(p.right);
                e.add(p.error);
            }
            (v.value(), e.value())
        };
        let (mut value, mut error) = total(&panels);
        let mut since_refresh = 0usize;
        loop {
            if !value.is_finite() || !error.is_finite() {
                return Err(Error::QuadratureNotConverged {
                    estimate: value,
                    error,
                    tolerance: self.config.abs_tol,
                });
            }
            let tolerance = self.config.abs_tol.max(self.config.rel_tol * value.abs());
            if error <= tolerance {
                break;
            }
            let Some(top) = heap.pop() else {
                return Err(Error::QuadratureNotConverged { estimate: value, error, tolerance });
            };
            if panels.len() >= self.config.max_panels {
                return Err(Error::QuadratureNotConverged { estimate: value, error, tolerance });
            }
            let p = panels[top.index];
            let m = 0.5 * (p.a + p.b);
            if !(m > p.a && m < p.b) || (p.b - p.a) <= 1e-13 * p.a.abs().max(p.b.abs()).max(1e-300) {
                // cannot bisect further; drop it from the queue
                continue;
            }
            let children = [(p.a, m, p.left), (m, p.b, p.right)];
            let mut new_panels = [p; 2];
            for (slot, (a, b, whole)) in children.into_iter().enumerate() {
                let mid = 0.5 * (a + b);
                let left = self.rule.integrate(a, mid, &mut f);
                let right = self.rule.integrate(mid, b, &mut f);
                evaluations += 2 * self.rule.len();
                new_panels[slot] = Panel { a, b, left, right, error: (left + right - whole).abs() };
            }
            value += new_panels[0].left + new_panels[0].right + new_panels[1].left + new_panels[1].right
                - p.left
                - p.right;
            error += new_panels[0].error + new_panels[1].error - p.error;
            panels[top.index] = new_panels[0];
            heap.push(HeapEntry { error: new_panels[0].error, index: top.index });
            heap.push(HeapEntry { error: new_panels[1].error, index: panels.len() });
            panels.push(new_panels[1]);
            since_refresh += 1;
            if since_refresh >= 1024 {
                let (v, e) = total(&panels);
                value = v;
                error = e;
                since_refresh = 0;
            }
        }
        let (value, error) = total(&panels);
        let mut spans: Vec<(f64, f64)> = panels.iter().map(|p| (p.a, p.b)).collect();
        spans.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(AdaptiveOutcome { value, error, evaluations, panels: spans })
    }

    /// Every point at which the accepted value of `outcome` was evaluated.
    pub fn accepted_nodes<'a>(&'a self, outcome: &'a AdaptiveOutcome) -> impl Iterator<Item = f64> + 'a {
        outcome.panels.iter().flat_map(move |&(a, b)| {
            let m = 0.5 * (a + b);
            self.rule.mapped_nodes(a, m).chain(self.rule.mapped_nodes(m, b))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 20, 64] {
            let rule = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg} got={got}");
            }
        }
    }

    #[test]
    fn hermite_reproduces_normal_moments() {
        for n in [1usize, 5, 20, 61, 122] {
            let rule = GaussHermite::new(n);
            assert_relative_eq!(rule.weights().iter().sum::<f64>(), 1.0, max_relative = 1e-14);
            let mut double_factorial = 1.0;
            for k in (0..(2 * n).min(40)).step_by(2) {
                if k > 0 {
                    double_factorial *= (k - 1) as f64;
                }
                let got = rule.expectation(|t| t.powi(k as i32));
                assert_relative_eq!(got, double_factorial, max_relative = 1e-11);
            }
            let odd = rule.expectation(|t| t.powi(3));
            assert!(odd.abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_smooth_expectation() {
        let rule = GaussHermite::new(61);
        // E[cos Z] = exp(-1/2)
        assert_relative_eq!(rule.expectation(libm::cos), (-0.5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn adaptive_resolves_narrow_peak() {
        let integrator = AdaptiveIntegrator::new(16, AdaptiveConfig::default());
        let width = 1e-3;
        // initial panels must resolve the feature scale
        let grid: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 * 0.005).collect();
        let out = integrator.integrate(&grid, |x| crate::math::gaussian_pdf(x, 0.3, width)).unwrap();
        assert!((out.value - 1.0).abs() < 1e-9, "{}", out.value);
        let nodes = integrator.accepted_nodes(&out).count();
        assert_eq!(nodes, out.panels().len() * 32);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let integrator =
            AdaptiveIntegrator::new(4, AdaptiveConfig { abs_tol: 1e-15, rel_tol: 0.0, max_panels: 8 });
        let err = integrator.integrate(&[0.0, 1.0], |x| 1.0 / x.sqrt()).unwrap_err();
        assert!(matches!(err, Error::QuadratureNotConverged { .. }));
    }
}
