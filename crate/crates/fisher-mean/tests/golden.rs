//! Output schemas are pinned by golden files; regenerate them deliberately if a format changes.

use fisher_mean::harness::run_trials_with_workers;
use fisher_mean::io::{summary_csv, sweep_csv, trials_csv};
use fisher_mean::{fisher_sweep, parse_spec, EstimatorKind, ExperimentConfig};

const TRIALS: &str = include_str!("golden/trials.csv");
const SUMMARY: &str = include_str!("golden/summary.csv");
const SWEEP: &str = include_str!("golden/sweep.csv");

fn small_report() -> fisher_mean::TrialReport {
    let cfg = ExperimentConfig::new(parse_spec("gaussian:0,1").unwrap(), 400, 0.05, 3, 7)
        .with_estimators(&EstimatorKind::ALL);
    run_trials_with_workers(&cfg, Some(1)).unwrap()
}

#[test]
fn csv_headers() {
    let report = small_report();
    assert_eq!(trials_csv(&report).unwrap().lines().next(), Some("estimator,trial,abs_error"));
    assert_eq!(
        summary_csv(&report).unwrap().lines().next(),
        Some("estimator,q50,q90,q_1_minus_delta,q99,oracle_I_r,bound,bound_ratio")
    );
    let rows = fisher_sweep(&parse_spec("gaussian:0,1").unwrap(), &[1.0]).unwrap();
    assert_eq!(sweep_csv(&rows).unwrap().lines().next(), Some("spec_id,r,I_r,tail_bound,error"));
}

#[test]
fn benchmark_files_match_golden() {
    let report = small_report();
    assert_eq!(trials_csv(&report).unwrap(), TRIALS);
    assert_eq!(summary_csv(&report).unwrap(), SUMMARY);
}

#[test]
fn sweep_file_matches_golden() {
    let rows = fisher_sweep(&parse_spec("gaussian:0,1").unwrap(), &[0.5, 1.0, 2.0]).unwrap();
    assert_eq!(sweep_csv(&rows).unwrap(), SWEEP);
}

#[test]
fn failed_rows_keep_their_shape() {
    let rows = vec![fisher_mean::SweepRow {
        spec_id: "laplace:0,1".into(),
        r: 0.25,
        i_r: None,
        tail_bound: None,
        error: Some("quadrature did not converge".into()),
    }];
    assert_eq!(
        sweep_csv(&rows).unwrap(),
        "spec_id,r,I_r,tail_bound,error\n\"laplace:0,1\",0.25,,,quadrature did not converge\n"
    );
}

#[test]
fn json_mirrors_csv_fields() {
    let report = small_report();
    let v: serde_json::Value = serde_json::to_value(&report).unwrap();
    assert!(v["oracle_I_r"].is_number());
    assert!(v["bound"].is_number());
    for e in v["estimators"].as_array().unwrap() {
        for key in ["estimator", "errors", "q50", "q90", "q_1_minus_delta", "q99", "bound_ratio"] {
            assert!(!e[key].is_null(), "{key}");
        }
    }
}
