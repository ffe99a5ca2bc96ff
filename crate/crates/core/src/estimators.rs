//! Location estimators: the pilot estimators, the one-step Newton correction on
//! the symmetrized clipped KDE score, and the three-stage global pipeline.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{estimate_fisher_with, FisherConfig, FisherEstimate};
use crate::kde::{KdeModel, KdeSummary, SymmetrizedScore};
use crate::math::{ceil, floor, ln, median_in_place, powf, sample_std, CompensatedSum};
use crate::rng::RngStream;

/// Stream tag of the Newton-step perturbation noise.
pub const PERTURBATION_TAG: u64 = 0x0070_6572_7475_7262;

/// `n` must exceed `MIN_SAMPLES_PER_LOG * log(1/delta)` for the global estimator.
pub const MIN_SAMPLES_PER_LOG: f64 = 50.0;

/// Stage-2 Fisher estimates below this are rejected.
pub const MIN_FISHER: f64 = 1e-12;

/// Smallest admissible `xi` override, and the floor applied to the automatic one.
pub const XI_OVERRIDE_MIN: f64 = 3.0;
pub const XI_FLOOR: f64 = 4.0;

/// Whether the stage-2 score is clipped at `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clipping {
    #[default]
    Enabled,
    /// `T = inf`; only useful to demonstrate why clipping is there.
    Disabled,
}

/// Optional replacements for the automatically derived tuning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

/// Settings of [`global_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clipping: Clipping,
}

impl EstimatorConfig {
    pub fn new(delta: f64, seed: u64) -> Self {
        Self { delta, r: None, xi: None, seed, clipping: Clipping::Enabled }
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = Some(r);
        self
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = Some(xi);
        self
    }

    pub fn with_clipping(mut self, clipping: Clipping) -> Self {
        self.clipping = clipping;
        self
    }

    fn overrides(&self) -> ParameterOverrides {
        ParameterOverrides { r: self.r, xi: self.xi }
    }
}

/// Tuning parameters after defaults, clamps and overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub eta: f64,
    pub xi: f64,
    pub gamma: f64,
    pub r: f64,
    /// Clip threshold of the stage-2 model (`null` in JSON when clipping is off).
    pub threshold: f64,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Failure budget of the stage-2 fit, `delta / xi`.
    pub stage_delta: f64,
    pub sigma_hat: f64,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Half-open index ranges of the three stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRanges {
    pub pilot: [usize; 2],
    pub kde: [usize; 2],
    pub newton: [usize; 2],
}

/// Free-form numeric diagnostics and warnings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub values: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    fn set(&mut self, key: &str, value: f64) {
        self.values.insert(String::from(key), value);
    }
}

/// Output of [`global_estimate`]; `mu_hat == mu_1 - eps_hat` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub mu_hat: f64,
    pub mu_1: f64,
    pub eps_hat: f64,
    pub fisher: FisherEstimate,
    pub params: ResolvedParams,
    pub stages: StageRanges,
    pub kde: KdeSummary,
    pub diagnostics: Diagnostics,
}

/// Sample mean.
pub fn empirical_mean(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(crate::math::mean(samples))
}

/// Median of the means of `blocks` consecutive blocks of size `ceil(n / blocks)`;
/// the last block may be shorter.
pub fn median_of_means(samples: &[f64], blocks: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if blocks == 0 {
        return Err(Error::InvalidConfig("median of means needs at least one block".into()));
    }
    let size = samples.len().div_ceil(blocks);
    let mut means: Vec<f64> = samples.chunks(size).map(crate::math::mean).collect();
    Ok(median_in_place(&mut means))
}

/// Median of `(X_{2i-1} + X_{2i}) / 2`; a trailing odd sample is dropped.
pub fn median_pairwise_means(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    let mut means: Vec<f64> = samples.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    Ok(median_in_place(&mut means))
}

fn validate_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("delta must lie in (0, 1/2], got {delta}")))
    }
}

/// `eta = (log(1/delta) / n)^(1/13)`.
fn eta_of(n: usize, delta: f64) -> f64 {
    powf(ln(1.0 / delta) / n as f64, 1.0 / 13.0)
}

fn resolve_xi(eta: f64, overrides: &ParameterOverrides, warnings: &mut Vec<String>) -> Result<f64> {
    match overrides.xi {
        Some(xi) if xi.is_finite() && xi > XI_OVERRIDE_MIN => Ok(xi),
        Some(xi) => Err(Error::InvalidConfig(format!("xi must exceed {XI_OVERRIDE_MIN}, got {xi}"))),
        None if 1.0 / eta < XI_FLOOR => {
            warnings.push(format!("xi = 1/eta = {} is below {XI_FLOOR}; using {XI_FLOOR}", 1.0 / eta));
            Ok(XI_FLOOR)
        }
        None => Ok(1.0 / eta),
    }
}

/// Resolves `eta`, `xi`, `gamma`, the stage sizes, `r` and the clip threshold.
///
/// `r` defaults to `eta * sigma_hat`. An override above `sigma_hat` is clamped to
/// it; one below `eta * sigma_hat` is kept, with a warning.
pub fn derive_parameters(
    n: usize,
    delta: f64,
    sigma_hat: f64,
    overrides: ParameterOverrides,
) -> Result<ResolvedParams> {
    validate_delta(delta)?;
    if !(n as f64 > ln(1.0 / delta)) {
        return Err(Error::InvalidConfig(format!("n = {n} must exceed log(1/delta)")));
    }
    if !(sigma_hat.is_finite() && sigma_hat >= 0.0) {
        return Err(Error::InvalidConfig(format!("sigma_hat must be finite and >= 0, got {sigma_hat}")));
    }
    let mut warnings = Vec::new();
    let eta = eta_of(n, delta);
    let xi = resolve_xi(eta, &overrides, &mut warnings)?;
    let gamma = 1.0 / (eta * eta);
    let r = match overrides.r {
        Some(r) if !(r.is_finite() && r > 0.0) => {
            return Err(Error::InvalidConfig(format!("r must be positive, got {r}")))
        }
        Some(r) if sigma_hat == 0.0 => r,
        Some(r) if r > sigma_hat => {
            warnings.push(format!("r = {r} exceeds sigma_hat = {sigma_hat}; clamped"));
            sigma_hat
        }
        Some(r) => {
            if r < eta * sigma_hat {
                warnings.push(format!(
                    "r = {r} is below eta * sigma_hat = {}; kept as requested",
                    eta * sigma_hat
                ));
            }
            r
        }
        None if sigma_hat == 0.0 => {
            warnings.push(format!("sigma_hat is 0; using r = eta = {eta}"));
            eta
        }
        None => eta * sigma_hat,
    };
    let n1 = floor(n as f64 / xi) as usize;
    let n2 = n1;
    let n3 = n.saturating_sub(n1 + n2);
    let stage_delta = delta / xi;
    let threshold = crate::kde::clip_threshold(n2, stage_delta, r)?;
    Ok(ResolvedParams { eta, xi, gamma, r, threshold, n1, n2, n3, stage_delta, sigma_hat, warnings })
}

/// Sum of the symmetrized score over perturbed samples, divided by `I_hat * n`.
fn newton_offset<S: SymmetrizedScore>(
    samples: &[f64],
    score: &S,
    fisher: &FisherEstimate,
    stream: &mut RngStream,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if !(fisher.value >= MIN_FISHER) {
        return Err(Error::DegenerateFisher { value: fisher.value });
    }
    let r = score.bandwidth();
    let mut acc = CompensatedSum::new();
    for &x in samples {
        let perturbed = x + r * stream.standard_normal();
        acc.add(score.symmetrized(perturbed));
    }
    Ok(acc.value() / (fisher.value * samples.len() as f64))
}

/// One Newton step from `score.center()`:
/// `mu_1 - (1 / (I_hat n)) sum_i s_sym(x_i + N(0, r^2))`.
pub fn local_estimate<S: SymmetrizedScore>(
    samples: &[f64],
    score: &S,
    fisher: &FisherEstimate,
    stream: &mut RngStream,
) -> Result<f64> {
    Ok(score.center() - newton_offset(samples, score, fisher, stream)?)
}

/// Checks that `n` samples admit the three-stage split and returns the stage size `n1`.
///
/// Requires `n > 50 log(1/delta)`, `floor(n/xi) >= 4` and at least one sample left for
/// the Newton step.
pub fn check_sample_size(n: usize, delta: f64, overrides: ParameterOverrides) -> Result<usize> {
    validate_delta(delta)?;
    let log_inv = ln(1.0 / delta);
    let required_by_log = floor(MIN_SAMPLES_PER_LOG * log_inv) as usize + 1;
    if n < required_by_log {
        return Err(Error::InsufficientSamples { n, required: required_by_log });
    }
    let mut scratch = Vec::new();
    let xi = resolve_xi(eta_of(n, delta), &overrides, &mut scratch)?;
    let n1 = floor(n as f64 / xi) as usize;
    if n1 < 4 || n <= 2 * n1 {
        let required = (ceil(4.0 * xi) as usize).max(required_by_log).max(2 * n1 + 1);
        return Err(Error::InsufficientSamples { n, required });
    }
    Ok(n1)
}

/// Three-stage estimator: pilot on the first `floor(n/xi)` samples, KDE and
/// Fisher estimate on the next `floor(n/xi)`, Newton step on the rest.
pub fn global_estimate(samples: &[f64], config: &EstimatorConfig) -> Result<EstimateResult> {
    let n = samples.len();
    validate_delta(config.delta)?;
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("samples must be finite".into()));
    }
    let n1 = check_sample_size(n, config.delta, config.overrides())?;

    let pilot = &samples[..n1];
    let mu_1 = median_pairwise_means(pilot)?;
    let sigma_hat = sample_std(pilot);
    let mut params = derive_parameters(n, config.delta, sigma_hat, config.overrides())?;
    debug_assert_eq!(params.n1, n1);
    let stages = StageRanges { pilot: [0, n1], kde: [n1, 2 * n1], newton: [2 * n1, n] };

    let mut kde = KdeModel::fit(&samples[n1..2 * n1], params.r, params.stage_delta)?.with_sym_point(mu_1)?;
    if config.clipping == Clipping::Disabled {
        kde = kde.without_clipping();
    }
    params.threshold = kde.threshold();
    let table = kde.score_table()?;
    let fisher = estimate_fisher_with(&table, &FisherConfig::default())?;
    if !(fisher.value >= MIN_FISHER) {
        return Err(Error::DegenerateFisher { value: fisher.value });
    }
    let mut stream = RngStream::new(config.seed, PERTURBATION_TAG, 0);
    let eps_hat = newton_offset(&samples[2 * n1..], &table, &fisher, &mut stream)?;

    let mut diagnostics =
        Diagnostics { warnings: core::mem::take(&mut params.warnings), ..Default::default() };
    let stats = table.stats();
    diagnostics.set("score_table_nodes", stats.nodes as f64);
    diagnostics.set("score_table_direct_evaluations", stats.direct_evaluations as f64);
    diagnostics.set("score_table_max_midpoint_error", stats.max_midpoint_error);
    diagnostics.set("score_table_forced_intervals", stats.forced as f64);
    diagnostics.set("xi_clamped", if config.xi.is_none() && params.xi == XI_FLOOR { 1.0 } else { 0.0 });

    Ok(EstimateResult {
        mu_hat: mu_1 - eps_hat,
        mu_1,
        eps_hat,
        fisher,
        params,
        stages,
        kde: kde.summary(),
        diagnostics,
    })
}
