use fisher_mean_core::estimators::{global_estimate, local_estimate, median_pairwise_means};
use fisher_mean_core::kde::SymmetrizedScore;
use fisher_mean_core::math::ln;
use fisher_mean_core::{DistributionSpec, Error, EstimatorConfig, FisherEstimate, RngStream};
use proptest::prelude::*;

fn draw(spec: &DistributionSpec, n: usize, seed: u64) -> Vec<f64> {
    spec.sample(&mut RngStream::new(seed, 31, 0), n)
}

/// The exact smoothed Gaussian score about `center`.
struct TrueScore {
    center: f64,
    r: f64,
}

impl SymmetrizedScore for TrueScore {
    fn center(&self) -> f64 {
        self.center
    }
    fn threshold(&self) -> f64 {
        f64::INFINITY
    }
    fn bandwidth(&self) -> f64 {
        self.r
    }
    fn clipped_right(&self, x: f64) -> f64 {
        -(x - self.center) / (1.0 + self.r * self.r)
    }
}

#[test]
fn newton_step_with_true_score() {
    let r = 0.3;
    let n = 100_000;
    let xs = draw(&DistributionSpec::gaussian(0.0, 1.0).unwrap(), n, 1);
    let info = 1.0 / (1.0 + r * r);
    let score = TrueScore { center: 0.1, r };
    let mut stream = RngStream::new(1, 2, 3);
    let mu = local_estimate(&xs, &score, &FisherEstimate::from_value(info), &mut stream).unwrap();
    assert!(mu.abs() <= 3.0 * (1.0 / (n as f64 * info)).sqrt(), "{mu}");
}

#[test]
fn local_step_is_deterministic() {
    let xs = draw(&DistributionSpec::laplace(0.0, 1.0).unwrap(), 1000, 2);
    let score = TrueScore { center: -0.05, r: 0.2 };
    let f = FisherEstimate::from_value(0.9);
    let a = local_estimate(&xs, &score, &f, &mut RngStream::new(4, 4, 4)).unwrap();
    let b = local_estimate(&xs, &score, &f, &mut RngStream::new(4, 4, 4)).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn global_result_structure() {
    let spec = DistributionSpec::gaussian(0.0, 1.0).unwrap();
    let xs = draw(&spec, 20_000, 3);
    let res = global_estimate(&xs, &EstimatorConfig::new(0.05, 9)).unwrap();
    assert_eq!(res.mu_hat, res.mu_1 - res.eps_hat);
    let p = &res.params;
    assert_eq!(p.xi, 4.0);
    assert_eq!((p.n1, p.n2, p.n3), (5000, 5000, 10000));
    assert_eq!(res.stages.pilot, [0, 5000]);
    assert_eq!(res.stages.kde, [5000, 10000]);
    assert_eq!(res.stages.newton, [10000, 20000]);
    assert_eq!(res.diagnostics.values["xi_clamped"], 1.0);
    assert!(p.r >= p.eta * p.sigma_hat * (1.0 - 1e-12) && p.r <= p.sigma_hat);
    assert_eq!(res.kde.n, 5000);
    assert!(res.mu_hat.abs() < 0.1);
}

#[test]
fn stages_use_disjoint_samples() {
    // poison each stage in turn: only the matching output may move
    let spec = DistributionSpec::gaussian(0.0, 1.0).unwrap();
    let xs = draw(&spec, 20_000, 5);
    let cfg = EstimatorConfig::new(0.05, 1).with_r(0.3);
    let base = global_estimate(&xs, &cfg).unwrap();
    let [a, b] = base.stages.newton;
    let mut changed = xs.clone();
    for v in &mut changed[a..b] {
        *v += 0.5;
    }
    let moved = global_estimate(&changed, &cfg).unwrap();
    assert_eq!(moved.mu_1, base.mu_1);
    assert_eq!(moved.fisher, base.fisher);
    assert_ne!(moved.eps_hat, base.eps_hat);

    let [a, b] = base.stages.kde;
    let mut changed = xs.clone();
    for v in &mut changed[a..b] {
        *v *= 1.5;
    }
    let moved = global_estimate(&changed, &cfg).unwrap();
    assert_eq!(moved.mu_1, base.mu_1);
    assert_ne!(moved.fisher, base.fisher);

    let [a, b] = base.stages.pilot;
    assert_eq!((a, b), (0, base.params.n1));
    let ranges = [base.stages.pilot, base.stages.kde, base.stages.newton];
    for w in ranges.windows(2) {
        assert_eq!(w[0][1], w[1][0]);
    }
    assert_eq!(ranges[2][1], xs.len());
}

#[test]
fn constant_input_does_not_fail() {
    let xs = vec![2.5; 5000];
    let res = global_estimate(&xs, &EstimatorConfig::new(0.05, 3)).unwrap();
    assert_eq!(res.mu_1, 2.5);
    assert!(res.eps_hat.is_finite());
    assert!((res.mu_hat - 2.5).abs() < 0.1);
}

#[test]
fn insufficient_samples() {
    let xs = draw(&DistributionSpec::gaussian(0.0, 1.0).unwrap(), 100, 6);
    match global_estimate(&xs, &EstimatorConfig::new(0.05, 0)) {
        Err(Error::InsufficientSamples { n, required }) => {
            assert_eq!(n, 100);
            assert!(required as f64 > 50.0 * ln(20.0));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn r_override_clamped_to_sigma_hat() {
    let xs = draw(&DistributionSpec::gaussian(0.0, 1.0).unwrap(), 20_000, 7);
    let res = global_estimate(&xs, &EstimatorConfig::new(0.05, 0).with_r(10.0)).unwrap();
    assert_eq!(res.params.r, res.params.sigma_hat);
    assert!(!res.diagnostics.warnings.is_empty());
}

#[test]
fn pilot_concentration() {
    let n = 10_000;
    let trials = 5000;
    let spec = DistributionSpec::gaussian(0.0, 1.0).unwrap();
    let mut errors: Vec<f64> = (0..trials)
        .map(|i| median_pairwise_means(&spec.sample(&mut RngStream::new(77, 1, i), n)).unwrap().abs())
        .collect();
    errors.sort_by(f64::total_cmp);
    let q99 = errors[(0.99 * trials as f64).ceil() as usize - 1];
    let bound = 3.0 * (200f64.ln() / n as f64).sqrt();
    assert!(q99 <= bound, "{q99} > {bound}");
}

#[test]
fn json_round_trip() {
    let xs = draw(&DistributionSpec::gaussian(0.0, 1.0).unwrap(), 5000, 8);
    let res = global_estimate(&xs, &EstimatorConfig::new(0.05, 2)).unwrap();
    let text = serde_json::to_string(&res).unwrap();
    assert!(text.contains("\"fisher_estimate\""));
    let back: fisher_mean_core::EstimateResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back.mu_hat, res.mu_hat);
    assert_eq!(back.params.n3, res.params.n3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn translation_equivariance(seed in any::<u64>(), shift in -50.0f64..50.0, fixed_r in any::<bool>()) {
        let xs = draw(&DistributionSpec::gaussian(0.0, 1.0).unwrap(), 4000, seed);
        let moved: Vec<f64> = xs.iter().map(|v| v + shift).collect();
        let mut cfg = EstimatorConfig::new(0.05, seed);
        if fixed_r {
            cfg = cfg.with_r(0.3);
        }
        let a = global_estimate(&xs, &cfg).unwrap();
        let b = global_estimate(&moved, &cfg).unwrap();
        prop_assert!((b.mu_hat - (a.mu_hat + shift)).abs() <= 1e-9, "{} vs {}", b.mu_hat, a.mu_hat + shift);
    }

    #[test]
    fn identity_holds(seed in any::<u64>(), n in 2000usize..6000) {
        let xs = draw(&DistributionSpec::laplace(1.0, 0.5).unwrap(), n, seed);
        let res = global_estimate(&xs, &EstimatorConfig::new(0.05, seed)).unwrap();
        prop_assert_eq!(res.mu_hat, res.mu_1 - res.eps_hat);
        prop_assert_eq!(res.params.n1 + res.params.n2 + res.params.n3, n);
    }
}
