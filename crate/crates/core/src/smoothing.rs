//! The r-smoothed model `f_r = f * N(0, r^2)` evaluated exactly.
//!
//! Gaussians, atoms and triangles convolve in closed form. Laplace parts use a
//! fixed Gauss-Legendre rule in the kernel variable, split at the kink. Global
//! functionals (normalization, Fisher information, Cramér-Rao ratios) go through
//! adaptive composite Gauss-Legendre over the union of per-part windows.

use alloc::vec::Vec;

use crate::distributions::{DistributionSpec, Part};
use crate::error::{Error, Result};
use crate::math::{exp, ln, normal_cdf, normal_pdf, normal_sf, sqrt, FRAC_1_SQRT_2PI};
use crate::quadrature::{AdaptiveConfig, AdaptiveIntegrator, AdaptiveOutcome, GaussLegendre};

/// Densities below this are treated as outside the representable support.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Nodes per panel in the kernel-variable rule used for Laplace parts.
const LAPLACE_NODES: usize = 24;
const LAPLACE_PANELS: [f64; 9] = [-12.0, -6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0, 12.0];

/// Quadrature settings for the smoothed-model functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Gauss-Legendre nodes per panel.
    pub nodes_per_component: usize,
    /// Window half-width, in smoothed standard deviations of each part.
    pub tail_halfwidth_sigmas: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes_per_component: 20,
            tail_halfwidth_sigmas: 12.0,
            abs_tol: 1e-9,
            rel_tol: 1e-11,
            max_panels: 1 << 21,
        }
    }
}

/// Density and its first two derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Eval {
    pub pdf: f64,
    pub d1: f64,
    pub d2: f64,
}

impl core::ops::AddAssign for Eval {
    fn add_assign(&mut self, rhs: Self) {
        self.pdf += rhs.pdf;
        self.d1 += rhs.d1;
        self.d2 += rhs.d2;
    }
}

impl Eval {
    /// `f'/f`, or 0 where the density is below [`DENSITY_FLOOR`].
    pub fn score_or_zero(&self) -> f64 {
        if self.pdf < DENSITY_FLOOR {
            0.0
        } else {
            self.d1 / self.pdf
        }
    }
}

/// `I_r` with its error budget.
#[derive(Debug, Clone)]
pub struct FisherInformation {
    pub value: f64,
    /// Bound on the mass of `s_r^2 f_r` outside the integration domain.
    pub tail_bound: f64,
    /// Quadrature error estimate inside the domain.
    pub error: f64,
    /// Points at which the accepted value was evaluated.
    pub nodes: Vec<f64>,
}

/// A real function with its derivative, used as a competitor to the score.
pub trait TestFunction {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// `g(x) = x - center`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub center: f64,
}

impl TestFunction for Linear {
    fn value(&self, x: f64) -> f64 {
        x - self.center
    }
    fn derivative(&self, _x: f64) -> f64 {
        1.0
    }
}

/// `g(x) = tanh((x - center) / scale)`.
#[derive(Debug, Clone, Copy)]
pub struct Tanh {
    pub center: f64,
    pub scale: f64,
}

impl TestFunction for Tanh {
    fn value(&self, x: f64) -> f64 {
        crate::math::tanh((x - self.center) / self.scale)
    }
    fn derivative(&self, x: f64) -> f64 {
        let t = self.value(x);
        (1.0 - t * t) / self.scale
    }
}

/// The smoothed score of a model as a test function.
#[derive(Debug, Clone, Copy)]
pub struct ScoreFunction<'a>(pub &'a SmoothedModel);

impl TestFunction for ScoreFunction<'_> {
    fn value(&self, x: f64) -> f64 {
        self.0.eval(x).score_or_zero()
    }
    fn derivative(&self, x: f64) -> f64 {
        let e = self.0.eval(x);
        if e.pdf < DENSITY_FLOOR {
            return 0.0;
        }
        let s = e.d1 / e.pdf;
        e.d2 / e.pdf - s * s
    }
}

/// `f_r` for a fixed spec and smoothing radius.
#[derive(Debug, Clone)]
pub struct SmoothedModel {
    spec: DistributionSpec,
    r: f64,
    quad: QuadratureConfig,
    laplace_rule: GaussLegendre,
}

impl SmoothedModel {
    pub fn new(spec: DistributionSpec, r: f64) -> Result<Self> {
        Self::with_quadrature(spec, r, QuadratureConfig::default())
    }

    pub fn with_quadrature(spec: DistributionSpec, r: f64, quad: QuadratureConfig) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!("r must be positive, got {r}")));
        }
        if quad.nodes_per_component == 0
            || !(quad.tail_halfwidth_sigmas > 0.0)
            || !(quad.abs_tol > 0.0)
            || quad.rel_tol < 0.0
        {
            return Err(Error::InvalidConfig(alloc::format!("invalid quadrature config {quad:?}")));
        }
        Ok(Self { spec, r, quad, laplace_rule: GaussLegendre::new(LAPLACE_NODES) })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quad
    }

    /// `sigma^2 + r^2`.
    pub fn smoothed_variance(&self) -> f64 {
        self.spec.variance() + self.r * self.r
    }

    /// `f_r(x)`, `f_r'(x)` and `f_r''(x)`.
    pub fn eval(&self, x: f64) -> Eval {
        let mut out = Eval::default();
        for part in self.spec.parts() {
            out += self.eval_part(part, x);
        }
        out
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.eval(x).pdf
    }

    pub fn pdf_derivative(&self, x: f64) -> f64 {
        self.eval(x).d1
    }

    pub fn pdf_second_derivative(&self, x: f64) -> f64 {
        self.eval(x).d2
    }

    /// `s_r(x) = f_r'(x) / f_r(x)`.
    pub fn score(&self, x: f64) -> Result<f64> {
        let e = self.eval(x);
        if !(e.pdf >= DENSITY_FLOOR) {
            return Err(Error::DensityUnderflow { x, density: e.pdf });
        }
        Ok(e.d1 / e.pdf)
    }

    fn eval_part(&self, part: &Part, x: f64) -> Eval {
        let r = self.r;
        match *part {
            Part::Normal { weight, mean, sd } => gaussian_eval(weight, x - mean, sqrt(sd * sd + r * r)),
            Part::Atom { weight, location } => gaussian_eval(weight, x - location, r),
            Part::Triangle { weight, center, width } => triangle_eval(weight, x, center, width, r),
            Part::Laplace { weight, mean, scale } => self.laplace_eval(weight, x - mean, scale),
        }
    }

    /// `E[L(u - r t)]` over `t ~ N(0, 1)` together with the two derivatives in `u`.
    fn laplace_eval(&self, weight: f64, u: f64, b: f64) -> Eval {
        let r = self.r;
        let kink = u / r;
        let mut knots: [f64; 10] = [0.0; 10];
        knots[..9].copy_from_slice(&LAPLACE_PANELS);
        let mut count = 9;
        if kink > LAPLACE_PANELS[0] && kink < LAPLACE_PANELS[8] && !LAPLACE_PANELS.contains(&kink) {
            knots[9] = kink;
            count = 10;
            knots.sort_by(f64::total_cmp);
        }
        let mut pdf = crate::math::CompensatedSum::new();
        let mut d1 = crate::math::CompensatedSum::new();
        let mut d2 = crate::math::CompensatedSum::new();
        let norm = 0.5 / b;
        for pair in knots[..count].windows(2) {
            let (a, c) = (pair[0], pair[1]);
            let half = 0.5 * (c - a);
            let mid = 0.5 * (a + c);
            for (&node, &w) in self.laplace_rule.nodes().iter().zip(self.laplace_rule.weights()) {
                let t = mid + half * node;
                let base = half * w * normal_pdf(t) * norm * exp(-(u - r * t).abs() / b);
                pdf.add(base);
                d1.add(-t / r * base);
                d2.add((t * t - 1.0) / (r * r) * base);
            }
        }
        Eval { pdf: weight * pdf.value(), d1: weight * d1.value(), d2: weight * d2.value() }
    }

    /// Windows `[lo, hi]` outside of which each part puts negligible smoothed mass,
    /// each with its initial panel width and the mass it leaves outside.
    fn windows(&self) -> Vec<Window> {
        let h = self.quad.tail_halfwidth_sigmas;
        let r = self.r;
        let two_tail = 2.0 * normal_sf(h);
        let mut out = Vec::new();
        for part in self.spec.parts() {
            match *part {
                Part::Normal { weight, mean, sd } => {
                    let s = sqrt(sd * sd + r * r);
                    out.push(Window {
                        lo: mean - h * s,
                        hi: mean + h * s,
                        step: 0.25 * s,
                        outside: weight * two_tail,
                    });
                }
                Part::Atom { weight, location } => out.push(Window {
                    lo: location - h * r,
                    hi: location + h * r,
                    step: 0.5 * r,
                    outside: weight * two_tail,
                }),
                Part::Triangle { weight, center, width } => out.push(Window {
                    lo: center - 0.5 * width - h * r,
                    hi: center + 0.5 * width + h * r,
                    step: 0.5 * r,
                    outside: weight * two_tail,
                }),
                Part::Laplace { weight, mean, scale } => {
                    let core = h * r;
                    let reach = 0.5 * scale * h * h + core;
                    let outside = weight * (exp(-0.5 * h * h) + two_tail);
                    out.push(Window { lo: mean - core, hi: mean + core, step: 0.5 * r, outside: 0.0 });
                    out.push(Window { lo: mean - reach, hi: mean - core, step: 0.5 * scale, outside: 0.0 });
                    out.push(Window { lo: mean + core, hi: mean + reach, step: 0.5 * scale, outside });
                }
            }
        }
        out
    }

    /// Sorted initial panel boundaries covering every part window.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        for w in self.windows() {
            let panels = crate::math::ceil((w.hi - w.lo) / w.step).max(1.0) as usize;
            let width = (w.hi - w.lo) / panels as f64;
            pts.extend((0..=panels).map(|i| w.lo + i as f64 * width));
            pts.push(w.hi);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Upper bound on the smoothed mass outside the integration domain.
    pub fn outside_mass(&self) -> f64 {
        self.windows().iter().map(|w| w.outside).sum()
    }

    fn integrator(&self) -> AdaptiveIntegrator {
        AdaptiveIntegrator::new(
            self.quad.nodes_per_component,
            AdaptiveConfig {
                abs_tol: self.quad.abs_tol,
                rel_tol: self.quad.rel_tol,
                max_panels: self.quad.max_panels,
            },
        )
    }

    /// `∫ h(x, f_r(x), f_r'(x), f_r''(x)) dx` over the integration domain.
    pub fn integrate(&self, mut h: impl FnMut(f64, &Eval) -> f64) -> Result<AdaptiveOutcome> {
        let bp = self.breakpoints();
        self.integrator().integrate(&bp, |x| {
            let e = self.eval(x);
            h(x, &e)
        })
    }

    /// `E_{f_r}[h(x)]`; points below the density floor contribute nothing.
    pub fn expect(&self, mut h: impl FnMut(f64, &Eval) -> f64) -> Result<AdaptiveOutcome> {
        self.integrate(|x, e| if e.pdf < DENSITY_FLOOR { 0.0 } else { h(x, e) * e.pdf })
    }

    /// Total smoothed mass over the integration domain.
    pub fn total_mass(&self) -> Result<AdaptiveOutcome> {
        self.integrate(|_, e| e.pdf)
    }

    /// `I_r = E[s_r^2]`.
    ///
    /// The tail bound uses `s_r(x) = -E[Z | X = x] / r` with `X = Y + r Z`, so
    /// that the contribution of a region of mass `P` is at most `sqrt(3 P) / r^2`.
    pub fn fisher_information(&self) -> Result<FisherInformation> {
        let integrator = self.integrator();
        let bp = self.breakpoints();
        let outcome = integrator.integrate(&bp, |x| {
            let e = self.eval(x);
            if e.pdf < DENSITY_FLOOR {
                0.0
            } else {
                e.d1 * e.d1 / e.pdf
            }
        })?;
        let nodes = integrator.accepted_nodes(&outcome).collect();
        Ok(FisherInformation {
            value: outcome.value,
            tail_bound: sqrt(3.0 * self.outside_mass()) / (self.r * self.r),
            error: outcome.error,
            nodes,
        })
    }

    /// `E[g^2] / E[g']^2`, which is at least `1 / I_r` for every admissible `g`.
    pub fn cramer_rao_ratio(&self, g: &impl TestFunction) -> Result<f64> {
        let second = self.expect(|x, _| {
            let v = g.value(x);
            v * v
        })?;
        let slope = self.expect(|x, _| g.derivative(x))?;
        if !(slope.value.abs() >= 1e-12) {
            return Err(Error::DegenerateTestFunction { mean_derivative: slope.value });
        }
        Ok(second.value / (slope.value * slope.value))
    }

    /// Right-hand side of the pointwise score bound,
    /// `(1/r) sqrt(2 log(1 / (sqrt(2 pi) r f_r(x))))`.
    pub fn score_bound(&self, density: f64) -> f64 {
        let arg = 1.0 / (crate::math::SQRT_2PI * self.r * density);
        sqrt(2.0 * ln(arg).max(0.0)) / self.r
    }
}

#[derive(Debug, Clone, Copy)]
struct Window {
    lo: f64,
    hi: f64,
    step: f64,
    outside: f64,
}

fn gaussian_eval(weight: f64, u: f64, s: f64) -> Eval {
    let z = u / s;
    let pdf = weight * FRAC_1_SQRT_2PI * exp(-0.5 * z * z) / s;
    Eval { pdf, d1: -z / s * pdf, d2: (z * z - 1.0) / (s * s) * pdf }
}

/// `psi(u) = E[max(u - r Z, 0)] = u Phi(u/r) + r phi(u/r)`, only used for `u <= 0`
/// arguments where it is free of cancellation.
fn ramp_smooth(u: f64, r: f64) -> f64 {
    let z = u / r;
    u * normal_cdf(z) + r * normal_pdf(z)
}

/// The symmetric triangle on `[c - w/2, c + w/2]` convolved with `N(0, r^2)`.
///
/// The triangle is `(4/w^2) [ramp(y - a) - 2 ramp(y - c) + ramp(y - b)]`. Using
/// `psi(u) = u + psi(-u)` the linear parts cancel, so both sides of the center
/// are evaluated through arguments on the decaying side of `psi`.
fn triangle_eval(weight: f64, x: f64, c: f64, w: f64, r: f64) -> Eval {
    let k = weight * 4.0 / (w * w);
    let a = c - 0.5 * w;
    let b = c + 0.5 * w;
    // reflect so the query is at or left of the center
    let (y, sign) = if x > c { (2.0 * c - x, -1.0) } else { (x, 1.0) };
    let (ua, uc, ub) = (y - a, y - c, y - b);
    // for y <= c: uc <= 0 and ub < 0, while ua may be positive; use psi(ua) directly,
    // which is of the size of the result there
    let pdf = k * (ramp_smooth(ua, r) - 2.0 * ramp_smooth(uc, r) + ramp_smooth(ub, r));
    let d1 = k * (normal_cdf(ua / r) - 2.0 * normal_cdf(uc / r) + normal_cdf(ub / r));
    let d2 = k / r * (normal_pdf(ua / r) - 2.0 * normal_pdf(uc / r) + normal_pdf(ub / r));
    Eval { pdf, d1: sign * d1, d2 }
}
