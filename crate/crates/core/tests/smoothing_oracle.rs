use approx::assert_relative_eq;
use fisher_mean_core::distributions::bundled_specs;
use fisher_mean_core::math::{gaussian_pdf, ln};
use fisher_mean_core::smoothing::{Linear, ScoreFunction, Tanh, TestFunction};
use fisher_mean_core::{DistributionSpec, Error, RngStream, SmoothedModel};

fn model(spec: DistributionSpec, r: f64) -> SmoothedModel {
    SmoothedModel::new(spec, r).unwrap()
}

fn radii(spec: &DistributionSpec) -> [f64; 3] {
    let s = spec.std_dev();
    [0.05 * s, 0.3 * s, s]
}

/// Draws from `f_r` itself.
fn smoothed_draws(m: &SmoothedModel, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, 99, 0);
    (0..count).map(|_| m.spec().sample_one(&mut rng) + m.r() * rng.standard_normal()).collect()
}

#[test]
fn gaussian_convolution_closed_form() {
    let m = model(DistributionSpec::gaussian(0.0, 1.0).unwrap(), 1.0);
    assert_relative_eq!(m.pdf(0.0), 0.282_094_791_773_878_14, max_relative = 1e-15);
    assert_eq!(m.pdf_derivative(0.0), 0.0);
    assert_relative_eq!(
        m.pdf_derivative(1.0),
        -0.5 * gaussian_pdf(1.0, 0.0, 2f64.sqrt()),
        max_relative = 1e-15
    );
    let m = model(DistributionSpec::gaussian(2.0, 1.5).unwrap(), 0.4);
    for &x in &[-3.0, 0.0, 2.0, 2.5, 9.0] {
        assert_relative_eq!(m.score(x).unwrap(), -(x - 2.0) / (2.25 + 0.16), max_relative = 1e-13);
    }
}

#[test]
fn atom_pair_is_two_kernels() {
    let (a, r) = (2.0, 0.7);
    let m = model(DistributionSpec::point_masses(&[(0.5, -a), (0.5, a)]).unwrap(), r);
    for &x in &[-3.0, -0.1, 0.0, 1.2, 5.0] {
        let expected = 0.5 * gaussian_pdf(x - a, 0.0, r) + 0.5 * gaussian_pdf(x + a, 0.0, r);
        assert_relative_eq!(m.pdf(x), expected, max_relative = 1e-14);
    }
}

#[test]
fn laplace_pdf_matches_monte_carlo() {
    let r = 0.5;
    let spec = DistributionSpec::laplace(0.0, 1.0).unwrap();
    let m = model(spec.clone(), r);
    let draws = 10_000_000;
    let mut rng = RngStream::new(2024, 7, 0);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let v = gaussian_pdf(-spec.sample_one(&mut rng), 0.0, r);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / draws as f64;
    let se = ((sum_sq / draws as f64 - mean * mean) / draws as f64).sqrt();
    // 1e-4 is about one standard error at this draw count
    let tol = 1e-4f64.max(4.0 * se);
    assert!((m.pdf(0.0) - mean).abs() < tol, "quadrature {} vs MC {mean} (se {se})", m.pdf(0.0));
}

#[test]
fn derivative_matches_central_difference() {
    for spec in bundled_specs() {
        for r in radii(&spec) {
            let m = model(spec.clone(), r);
            let h = 1e-5;
            for x in smoothed_draws(&m, 40, 3) {
                let fd = (m.pdf(x + h) - m.pdf(x - h)) / (2.0 * h);
                let d = m.pdf_derivative(x);
                // relative tolerance plus the roundoff floor of the difference quotient
                let roundoff = 1e-14 * m.pdf(x) / h;
                assert!(
                    (fd - d).abs() <= 1e-6 * d.abs() + roundoff,
                    "{} r={r} x={x}: fd {fd} vs {d}",
                    spec.label()
                );
            }
        }
    }
}

#[test]
fn score_is_log_density_slope() {
    for spec in bundled_specs() {
        for r in radii(&spec) {
            let m = model(spec.clone(), r);
            let sigma_r = m.smoothed_variance().sqrt();
            let h = 1e-4 * r;
            for x in smoothed_draws(&m, 200, 11) {
                let s = m.score(x).unwrap();
                let fd = (ln(m.pdf(x + h)) - ln(m.pdf(x - h))) / (2.0 * h);
                assert!(
                    (fd - s).abs() <= 1e-5 * s.abs().max(1.0 / sigma_r),
                    "{} r={r} x={x}: fd {fd} vs {s}",
                    spec.label()
                );
            }
        }
    }
}

#[test]
fn score_vanishes_at_center() {
    for spec in bundled_specs() {
        let m = model(spec.clone(), 0.3);
        assert!(m.score(spec.mean()).unwrap().abs() < 1e-12, "{}", spec.label());
    }
}

#[test]
fn normalization_and_sandwich() {
    for spec in bundled_specs() {
        for r in radii(&spec) {
            let m = model(spec.clone(), r);
            let mass = m.total_mass().unwrap();
            assert!((mass.value - 1.0).abs() <= 1e-6, "{} r={r}: mass {}", spec.label(), mass.value);
            let fi = m.fisher_information().unwrap();
            let lower = 1.0 / (spec.variance() + r * r);
            let upper = 1.0 / (r * r);
            assert!(fi.value >= lower * (1.0 - 1e-9), "{} r={r}: {} < {lower}", spec.label(), fi.value);
            assert!(fi.value <= upper * (1.0 + 1e-9), "{} r={r}: {} > {upper}", spec.label(), fi.value);
            let first = m.expect(|_, e| e.score_or_zero()).unwrap();
            assert!(first.value.abs() <= 1e-8 * (1.0 / r), "{} r={r}: E[s] = {}", spec.label(), first.value);
        }
    }
}

#[test]
fn pointwise_score_bound_at_quadrature_nodes() {
    for spec in bundled_specs() {
        for r in radii(&spec) {
            let m = model(spec.clone(), r);
            let fi = m.fisher_information().unwrap();
            assert!(!fi.nodes.is_empty());
            for &x in &fi.nodes {
                let e = m.eval(x);
                if e.pdf < 1e-300 {
                    continue;
                }
                let s = (e.d1 / e.pdf).abs();
                let bound = m.score_bound(e.pdf);
                // a lone atom attains the bound with equality
                assert!(s <= bound * (1.0 + 1e-9) + 1e-9 / r, "{} r={r} x={x}: {s} > {bound}", spec.label());
            }
        }
    }
}

#[test]
fn gaussian_fisher_closed_form() {
    let m = model(DistributionSpec::gaussian(0.0, 1.0).unwrap(), 1.0);
    assert_relative_eq!(m.fisher_information().unwrap().value, 0.5, max_relative = 1e-9);
}

#[test]
fn separated_atoms_reach_upper_bound() {
    let r = 0.2;
    let m = model(DistributionSpec::point_masses(&[(0.5, -100.0 * r), (0.5, 100.0 * r)]).unwrap(), r);
    let fi = m.fisher_information().unwrap();
    assert!((fi.value - 1.0 / (r * r)).abs() <= 1e-6, "{}", fi.value);
}

#[test]
fn laplace_small_radius_approaches_unsmoothed() {
    let spec = DistributionSpec::laplace(0.0, 1.0).unwrap();
    let target = 2.0 / spec.variance();
    let fi = model(spec, 0.01).fisher_information().unwrap();
    assert!((fi.value - target).abs() <= 0.05 * target, "{}", fi.value);
}

#[test]
fn sawtooth_phase_transition() {
    let spec = DistributionSpec::gaussian_sawtooth(0.0, 1.0, 0.05, 0.5, 41).unwrap();
    let small = model(spec.clone(), 0.005).fisher_information().unwrap().value;
    let large = model(spec.clone(), 0.5).fisher_information().unwrap().value;
    let reference = 1.0 / (spec.variance() + 0.25);
    assert!(small / large >= 10.0, "{small} / {large}");
    assert!(large <= 2.0 * reference && large >= 0.5 * reference, "{large} vs {reference}");
}

struct Odd<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(F, G);

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> TestFunction for Odd<F, G> {
    fn value(&self, x: f64) -> f64 {
        (self.0)(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        (self.1)(x)
    }
}

#[test]
fn cramer_rao_examples() {
    let m = model(DistributionSpec::gaussian(0.0, 1.0).unwrap(), 1.0);
    let inv = 1.0 / m.fisher_information().unwrap().value;
    assert_relative_eq!(m.cramer_rao_ratio(&ScoreFunction(&m)).unwrap(), inv, max_relative = 1e-6);
    let lin = m.cramer_rao_ratio(&Linear { center: 0.0 }).unwrap();
    assert_relative_eq!(lin, m.smoothed_variance(), max_relative = 1e-9);
    let tanh = m.cramer_rao_ratio(&Tanh { center: 0.0, scale: 1.0 }).unwrap();
    assert!(tanh >= 2.0 - 1e-9, "{tanh}");
}

#[test]
fn cramer_rao_degenerate() {
    let m = model(DistributionSpec::gaussian(0.0, 1.0).unwrap(), 1.0);
    let flat = Odd(|_| 0.0, |_| 0.0);
    assert!(matches!(m.cramer_rao_ratio(&flat), Err(Error::DegenerateTestFunction { .. })));
}

#[test]
fn quadrature_failure_is_reported() {
    // a two-point rule with a small panel budget cannot reach 1e-12
    let quad = fisher_mean_core::QuadratureConfig {
        nodes_per_component: 2,
        max_panels: 2000,
        abs_tol: 1e-12,
        rel_tol: 0.0,
        ..Default::default()
    };
    let m = SmoothedModel::with_quadrature(DistributionSpec::laplace(0.0, 1.0).unwrap(), 0.01, quad).unwrap();
    assert!(matches!(m.fisher_information(), Err(Error::QuadratureNotConverged { .. })));
}
