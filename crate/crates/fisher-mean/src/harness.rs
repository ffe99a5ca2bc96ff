//! Monte Carlo trials, Fisher-information sweeps and the score error diagnostic.

use std::collections::BTreeMap;

use fisher_mean_core::estimators::{check_sample_size, derive_parameters, ParameterOverrides};
use fisher_mean_core::math::ceil;
use fisher_mean_core::rng::stream_id;
use fisher_mean_core::{
    empirical_mean, global_estimate, median_of_means, median_pairwise_means, Clipping, DistributionSpec,
    Error, EstimatorConfig, KdeModel, RngStream, ScoreTable, SmoothedModel,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Stream tag for the data of each trial.
pub const SAMPLE_TAG: u64 = 0x7361_6d70_6c65;
/// Stream tag for per-trial estimator seeds.
pub const TRIAL_TAG: u64 = 0x0074_7269_616c;
/// Stream tag for the KDE samples of the score diagnostic.
pub const DIAGNOSTIC_TAG: u64 = 0x6469_6167;
/// Environment variable that fixes the worker count.
pub const WORKERS_ENV: &str = "FISHER_MEAN_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Global,
    EmpiricalMean,
    MedianOfMeans,
    MedianPairwiseMeans,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Global,
        EstimatorKind::EmpiricalMean,
        EstimatorKind::MedianOfMeans,
        EstimatorKind::MedianPairwiseMeans,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Global => "global",
            EstimatorKind::EmpiricalMean => "empirical_mean",
            EstimatorKind::MedianOfMeans => "median_of_means",
            EstimatorKind::MedianPairwiseMeans => "median_pairwise_means",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Global, EstimatorKind::EmpiricalMean]
}

/// One benchmark: `trials` independent draws of `n` samples, each fed to every estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: DistributionSpec,
    pub n: usize,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub clipping: Clipping,
}

impl ExperimentConfig {
    pub fn new(spec: DistributionSpec, n: usize, delta: f64, trials: usize, seed: u64) -> Self {
        Self {
            spec,
            n,
            delta,
            r: None,
            xi: None,
            trials,
            seed,
            estimators: default_estimators(),
            clipping: Clipping::Enabled,
        }
    }

    pub fn with_estimators(mut self, estimators: &[EstimatorKind]) -> Self {
        self.estimators = estimators.to_vec();
        self
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = Some(r);
        self
    }

    pub fn with_clipping(mut self, clipping: Clipping) -> Self {
        self.clipping = clipping;
        self
    }

    fn overrides(&self) -> ParameterOverrides {
        ParameterOverrides { r: self.r, xi: self.xi }
    }

    fn estimator_config(&self, trial: usize) -> EstimatorConfig {
        EstimatorConfig {
            delta: self.delta,
            r: self.r,
            xi: self.xi,
            seed: stream_id(self.seed, TRIAL_TAG, trial as u64),
            clipping: self.clipping,
        }
    }

    /// Blocks used by the median-of-means baseline, `ceil(8 log(1/delta))`.
    pub fn mom_blocks(&self) -> usize {
        ceil(8.0 * (1.0 / self.delta).ln()).max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg).into());
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return bad(format!("delta must lie in (0, 1/2], got {}", self.delta));
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        for kind in &self.estimators {
            match kind {
                EstimatorKind::Global => {
                    check_sample_size(self.n, self.delta, self.overrides())?;
                    derive_parameters(self.n, self.delta, self.spec.std_dev(), self.overrides())?;
                }
                EstimatorKind::EmpiricalMean if self.n == 0 => return bad("n must be positive".into()),
                EstimatorKind::MedianOfMeans if self.n < self.mom_blocks() => {
                    return bad(format!("median of means needs n >= {} blocks", self.mom_blocks()));
                }
                EstimatorKind::MedianPairwiseMeans if self.n < 2 => {
                    return bad("median of pairwise means needs n >= 2".into());
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The radius used for the oracle: the override, or the default schedule at the true sigma.
    pub fn resolved_r(&self) -> Result<f64> {
        Ok(derive_parameters(self.n, self.delta, self.spec.std_dev(), self.overrides())?.r)
    }
}

/// Nearest-rank quantile: the `ceil(q m)`-th smallest of `m` values.
///
/// `sorted` must be ascending. Returns NaN for an empty slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let m = sorted.len();
    // q * m can land a few ulps above an integer, e.g. 0.95 * 500
    let rank = ceil(q * m as f64 - 1e-9).clamp(1.0, m as f64) as usize;
    sorted[rank - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimator: EstimatorKind,
    /// `|mu_hat - mu|` per trial, `None` where the estimator failed.
    pub errors: Vec<Option<f64>>,
    pub q50: f64,
    pub q90: f64,
    pub q_1_minus_delta: f64,
    pub q99: f64,
    pub bound_ratio: f64,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

impl EstimatorReport {
    fn new(
        estimator: EstimatorKind,
        errors: Vec<Option<f64>>,
        delta: f64,
        bound: f64,
        first_failure: Option<String>,
    ) -> Self {
        let mut ok: Vec<f64> = errors.iter().flatten().copied().collect();
        ok.sort_by(f64::total_cmp);
        let q_1_minus_delta = nearest_rank(&ok, 1.0 - delta);
        Self {
            estimator,
            failures: errors.len() - ok.len(),
            errors,
            q50: nearest_rank(&ok, 0.5),
            q90: nearest_rank(&ok, 0.9),
            q_1_minus_delta,
            q99: nearest_rank(&ok, 0.99),
            bound_ratio: q_1_minus_delta / bound,
            first_failure,
        }
    }

    /// Quantile of the successful trials.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut ok: Vec<f64> = self.errors.iter().flatten().copied().collect();
        ok.sort_by(f64::total_cmp);
        nearest_rank(&ok, q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub config: ExperimentConfig,
    /// Radius at which the oracle was evaluated.
    pub r: f64,
    #[serde(rename = "oracle_I_r")]
    pub oracle_i_r: f64,
    /// `sqrt(2 log(2/delta) / (n I_r))`.
    pub bound: f64,
    pub estimators: Vec<EstimatorReport>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl TrialReport {
    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimatorReport> {
        self.estimators.iter().find(|e| e.estimator == kind)
    }
}

/// Worker count from `FISHER_MEAN_WORKERS`, or `None` to let rayon decide.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&w: &usize| w > 0)
}

struct TrialOutcome {
    errors: Vec<std::result::Result<f64, Error>>,
    global_r: Option<f64>,
    global_fisher: Option<f64>,
}

fn run_one(cfg: &ExperimentConfig, trial: usize) -> TrialOutcome {
    let mu = cfg.spec.mean();
    let xs = cfg.spec.sample(&mut RngStream::new(cfg.seed, SAMPLE_TAG, trial as u64), cfg.n);
    let mut global_r = None;
    let mut global_fisher = None;
    let errors = cfg
        .estimators
        .iter()
        .map(|kind| {
            let est = match kind {
                EstimatorKind::Global => global_estimate(&xs, &cfg.estimator_config(trial)).map(|res| {
                    global_r = Some(res.params.r);
                    global_fisher = Some(res.fisher.value);
                    res.mu_hat
                }),
                EstimatorKind::EmpiricalMean => empirical_mean(&xs),
                EstimatorKind::MedianOfMeans => median_of_means(&xs, cfg.mom_blocks()),
                EstimatorKind::MedianPairwiseMeans => median_pairwise_means(&xs),
            };
            est.map(|m| (m - mu).abs())
        })
        .collect();
    TrialOutcome { errors, global_r, global_fisher }
}

pub fn run_trials(cfg: &ExperimentConfig) -> Result<TrialReport> {
    run_trials_with_workers(cfg, workers_from_env())
}

/// Runs every trial; trial `i` draws from stream `(seed, SAMPLE_TAG, i)`.
///
/// A failing estimator marks its slot and the run continues.
pub fn run_trials_with_workers(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<TrialReport> {
    cfg.validate()?;
    let r = cfg.resolved_r()?;
    let oracle_i_r = SmoothedModel::new(cfg.spec.clone(), r)?.fisher_information()?.value;
    let bound = (2.0 * (2.0 / cfg.delta).ln() / (cfg.n as f64 * oracle_i_r)).sqrt();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        pool = pool.num_threads(w);
    }
    let outcomes: Vec<TrialOutcome> =
        pool.build()?.install(|| (0..cfg.trials).into_par_iter().map(|i| run_one(cfg, i)).collect());

    let mut diagnostics = BTreeMap::new();
    let mean_of = |values: Vec<f64>| {
        if values.is_empty() {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    };
    if cfg.estimators.contains(&EstimatorKind::Global) {
        diagnostics
            .insert("global_mean_r".into(), mean_of(outcomes.iter().filter_map(|o| o.global_r).collect()));
        diagnostics.insert(
            "global_mean_fisher_estimate".into(),
            mean_of(outcomes.iter().filter_map(|o| o.global_fisher).collect()),
        );
    }
    let estimators = cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(j, &kind)| {
            let mut first_failure = None;
            let errors = outcomes
                .iter()
                .map(|o| match &o.errors[j] {
                    Ok(e) => Some(*e),
                    Err(err) => {
                        first_failure.get_or_insert_with(|| err.to_string());
                        None
                    }
                })
                .collect();
            EstimatorReport::new(kind, errors, cfg.delta, bound, first_failure)
        })
        .collect::<Vec<_>>();
    for e in &estimators {
        diagnostics.insert(format!("{}_failures", e.estimator.name()), e.failures as f64);
    }
    Ok(TrialReport { config: cfg.clone(), r, oracle_i_r, bound, estimators, diagnostics })
}

/// One row of a Fisher-information sweep; a failed row carries the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Compact label of the distribution, as accepted by `--spec`.
    pub spec_id: String,
    pub r: f64,
    #[serde(rename = "I_r")]
    pub i_r: Option<f64>,
    pub tail_bound: Option<f64>,
    pub error: Option<String>,
}

/// Oracle `I_r` at each radius of a sorted, positive grid.
pub fn fisher_sweep(spec: &DistributionSpec, r_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if r_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) || r_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("r grid must be positive and sorted".into()).into());
    }
    let spec_id = spec.label();
    Ok(r_grid
        .par_iter()
        .map(|&r| match SmoothedModel::new(spec.clone(), r).and_then(|m| m.fisher_information()) {
            Ok(fi) => SweepRow {
                spec_id: spec_id.clone(),
                r,
                i_r: Some(fi.value),
                tail_bound: Some(fi.tail_bound),
                error: None,
            },
            Err(e) => SweepRow {
                spec_id: spec_id.clone(),
                r,
                i_r: None,
                tail_bound: None,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

/// Mean over seeds of `E_{f_r}[(s_clip - s_r)^2] / I_r`, where `s_clip` is the clipped
/// score of a KDE fitted on `n_kde` fresh samples.
pub fn score_l2_diagnostic(
    spec: &DistributionSpec,
    r: f64,
    n_kde: usize,
    delta: f64,
    seeds: &[u64],
) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::EmptySeedList.into());
    }
    let oracle = SmoothedModel::new(spec.clone(), r)?;
    let info = oracle.fisher_information()?.value;
    let values = seeds
        .par_iter()
        .map(|&seed| {
            let ys = spec.sample(&mut RngStream::new(seed, DIAGNOSTIC_TAG, n_kde as u64), n_kde);
            let kde = KdeModel::fit(&ys, r, delta)?;
            let (lo, hi) = (kde.samples()[0] - 12.0 * r, kde.samples()[n_kde - 1] + 12.0 * r);
            let table = ScoreTable::build(&kde, lo, hi);
            let l2 = oracle.expect(|x, e| {
                let d = table.clipped(x) - e.score_or_zero();
                d * d
            })?;
            Ok(l2.value / info)
        })
        .collect::<std::result::Result<Vec<f64>, Error>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
