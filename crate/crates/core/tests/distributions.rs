use fisher_mean_core::distributions::bundled_specs;
use fisher_mean_core::{DistributionSpec, RngStream};
use proptest::prelude::*;

#[test]
fn sample_moments_match() {
    for spec in bundled_specs() {
        let n = 400_000;
        let xs = spec.sample(&mut RngStream::new(5, 5, 0), n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let sd = spec.std_dev();
        assert!((mean - spec.mean()).abs() <= 5.0 * sd / (n as f64).sqrt(), "{}: mean {mean}", spec.label());
        assert!((var / spec.variance() - 1.0).abs() <= 0.05, "{}: var {var}", spec.label());
    }
}

#[test]
fn samples_are_reflection_symmetric_in_law() {
    // the fraction above the center is close to one half for every bundled law
    for spec in bundled_specs() {
        let n = 200_000;
        let xs = spec.sample(&mut RngStream::new(6, 6, 0), n);
        let mu = spec.mean();
        let above = xs.iter().filter(|&&x| x > mu).count() as f64;
        let below = xs.iter().filter(|&&x| x < mu).count() as f64;
        assert!((above - below).abs() <= 5.0 * (n as f64).sqrt(), "{}", spec.label());
    }
}

#[test]
fn spec_files_round_trip() {
    for spec in bundled_specs() {
        let text = serde_json::to_string(&spec).unwrap();
        let back: DistributionSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
    let bad = r#"{"kind":"gaussian_mixture","components":[{"weight":1.0,"mu":1.0,"sigma":1.0},{"weight":0.0,"mu":-2.0,"sigma":1.0}]}"#;
    assert!(serde_json::from_str::<DistributionSpec>(bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pdf_is_symmetric(
        mu in -10.0f64..10.0,
        sigma in 0.1f64..5.0,
        sep in 0.0f64..5.0,
        w in 0.05f64..0.45,
        t in 0.0f64..20.0,
    ) {
        let specs = [
            DistributionSpec::gaussian(mu, sigma).unwrap(),
            DistributionSpec::laplace(mu, sigma).unwrap(),
            DistributionSpec::gaussian_mixture(&[(0.5, mu - sep, sigma), (0.5, mu + sep, sigma)]).unwrap(),
            DistributionSpec::gaussian_mixture(&[(1.0 - 2.0 * w, mu, sigma), (w, mu - sep, 2.0 * sigma), (w, mu + sep, 2.0 * sigma)]).unwrap(),
        ];
        for spec in &specs {
            let (a, b) = (spec.pdf(mu + t), spec.pdf(mu - t));
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b) + 1e-300, "{}", spec.label());
            prop_assert!((spec.mean() - mu).abs() <= 1e-12 * (1.0 + mu.abs()));
        }
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), stream in any::<u64>()) {
        for spec in bundled_specs() {
            let a = spec.sample(&mut RngStream::new(seed, stream, 0), 64);
            let b = spec.sample(&mut RngStream::new(seed, stream, 0), 64);
            prop_assert_eq!(a, b);
        }
    }
}
