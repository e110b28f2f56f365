//! Case bootstrap for comparing two ensemble configurations.
//!
//! Resample `b` draws `n` case indices with replacement from the stream
//! [`stream_rng`]`(seed, b)` using [`uniform_index`], in order. Each resample
//! is therefore independent of thread scheduling, and serial and parallel
//! runs agree bit for bit.
//!
//! Intervals are 2.5/97.5 percentiles of the resampled statistic with linear
//! interpolation between order statistics. The two-sided p-value is
//! `min(1, 2 (min(#{d <= 0}, #{d >= 0}) + 1) / (B + 1))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, uniform_index};
use crate::selective::{aurc, risk_coverage_curve, CaseScore, RankedScores};

pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the ambient rayon pool.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl BootstrapConfig {
    pub fn new(resamples: usize, seed: u64) -> Self {
        Self {
            resamples,
            seed,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self::new(DEFAULT_RESAMPLES, 0)
    }
}

/// Significance tier of a paired comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    #[serde(rename = "ns")]
    NotSignificant,
    /// p < 0.05
    #[serde(rename = "*")]
    Significant,
    /// p < 0.001
    #[serde(rename = "†")]
    HighlySignificant,
}

impl Tier {
    pub fn from_p(p: f64) -> Self {
        if p < 0.001 {
            Tier::HighlySignificant
        } else if p < 0.05 {
            Tier::Significant
        } else {
            Tier::NotSignificant
        }
    }

    /// Marker appended to a rendered value; empty when not significant.
    pub fn marker(self) -> &'static str {
        match self {
            Tier::NotSignificant => "",
            Tier::Significant => "*",
            Tier::HighlySignificant => "†",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Statistic on the observed sample.
    pub mean_delta: f64,
    /// Mean of the statistic over resamples.
    pub bootstrap_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub tier: Tier,
    pub resamples: usize,
    pub seed: u64,
}

/// Point estimate with a percentile interval, for single-method rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Whether larger values of a metric are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Higher,
    Lower,
}

impl Direction {
    /// `+1` when higher is better, `-1` otherwise.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Higher => 1.0,
            Direction::Lower => -1.0,
        }
    }

    pub fn from_sign(s: i32) -> Result<Self> {
        match s {
            1 => Ok(Direction::Higher),
            -1 => Ok(Direction::Lower),
            other => Err(Error::InvalidArgument(format!(
                "direction sign must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// Per-case values of two methods over the same cases.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    case_ids: Vec<String>,
    values_a: Vec<f64>,
    values_b: Vec<f64>,
}

impl PairedSample {
    pub fn new(case_ids: Vec<String>, values_a: Vec<f64>, values_b: Vec<f64>) -> Result<Self> {
        if values_a.len() != case_ids.len() || values_b.len() != case_ids.len() {
            return Err(Error::MisalignedCases(format!(
                "{} ids, {} and {} values",
                case_ids.len(),
                values_a.len(),
                values_b.len()
            )));
        }
        Ok(Self {
            case_ids,
            values_a,
            values_b,
        })
    }

    pub fn len(&self) -> usize {
        self.case_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.case_ids.is_empty()
    }

    pub fn case_ids(&self) -> &[String] {
        &self.case_ids
    }

    /// `values_b - values_a`, case by case.
    pub fn deltas(&self) -> Vec<f64> {
        self.values_b
            .iter()
            .zip(&self.values_a)
            .map(|(b, a)| b - a)
            .collect()
    }

    pub fn swapped(&self) -> Self {
        Self {
            case_ids: self.case_ids.clone(),
            values_a: self.values_b.clone(),
            values_b: self.values_a.clone(),
        }
    }
}

/// Indices drawn for resample `b`.
pub fn resample_indices(seed: u64, b: usize, n: usize, out: &mut Vec<usize>) {
    let mut rng = stream_rng(seed, b as u64);
    out.clear();
    out.extend((0..n).map(|_| uniform_index(&mut rng, n)));
}

/// Evaluates `statistic` on `config.resamples` index resamples of `0..n`.
pub fn resample_statistic<F>(n: usize, config: &BootstrapConfig, statistic: F) -> Result<Vec<f64>>
where
    F: Fn(&[usize], &mut Vec<usize>) -> f64 + Sync,
{
    if config.resamples == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one resample".into()));
    }
    let run = || -> Vec<f64> {
        (0..config.resamples)
            .into_par_iter()
            .map_init(
                || (Vec::with_capacity(n), Vec::with_capacity(n)),
                |(idx, scratch), b| {
                    resample_indices(config.seed, b, n, idx);
                    statistic(idx, scratch)
                },
            )
            .collect()
    };
    match config.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn interval(stats: &[f64]) -> (f64, f64) {
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    (percentile(&sorted, 0.025), percentile(&sorted, 0.975))
}

fn summarize_deltas(observed: f64, stats: &[f64], config: &BootstrapConfig) -> BootstrapResult {
    let (ci_low, ci_high) = interval(stats);
    let below = stats.iter().filter(|&&d| d <= 0.0).count();
    let above = stats.iter().filter(|&&d| d >= 0.0).count();
    let b = stats.len() as f64;
    let p_value = (2.0 * (below.min(above) as f64 + 1.0) / (b + 1.0)).min(1.0);
    BootstrapResult {
        mean_delta: observed,
        bootstrap_mean: stats.iter().sum::<f64>() / b,
        ci_low,
        ci_high,
        p_value,
        tier: Tier::from_p(p_value),
        resamples: stats.len(),
        seed: config.seed,
    }
}

fn mean_at(values: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
}

fn bootstrap_differences(deltas: &[f64], config: &BootstrapConfig) -> Result<BootstrapResult> {
    if deltas.len() < 2 {
        return Err(Error::TooFewCases(deltas.len()));
    }
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument("non-finite per-case value".into()));
    }
    let observed = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let stats = resample_statistic(deltas.len(), config, |idx, _| mean_at(deltas, idx))?;
    Ok(summarize_deltas(observed, &stats, config))
}

/// Paired case bootstrap of `mean(values_b - values_a)`.
pub fn paired_bootstrap(sample: &PairedSample, config: &BootstrapConfig) -> Result<BootstrapResult> {
    bootstrap_differences(&sample.deltas(), config)
}

/// Paired bootstrap of `(values_b - values_a) * s`, the improvement of `b`
/// over `a` on a metric whose better direction is `direction`.
pub fn ood_delta(
    sample: &PairedSample,
    direction: Direction,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    let s = direction.sign();
    let deltas: Vec<f64> = sample.deltas().iter().map(|d| d * s).collect();
    bootstrap_differences(&deltas, config)
}

fn check_aligned(a: &[CaseScore], b: &[CaseScore]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::MisalignedCases(format!("{} vs {} cases", a.len(), b.len())));
    }
    if let Some((x, y)) = a.iter().zip(b).find(|(x, y)| x.case_id != y.case_id) {
        return Err(Error::MisalignedCases(format!(
            "`{}` paired with `{}`",
            x.case_id, y.case_id
        )));
    }
    if a.len() < 2 {
        return Err(Error::TooFewCases(a.len()));
    }
    Ok(())
}

fn signed_aurc_bootstrap(
    a: &[CaseScore],
    b: &[CaseScore],
    sign: f64,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    check_aligned(a, b)?;
    let ra = RankedScores::new(a)?;
    let rb = RankedScores::new(b)?;
    let observed = sign
        * (aurc(&risk_coverage_curve(b)?) - aurc(&risk_coverage_curve(a)?));
    let stats = resample_statistic(a.len(), config, |idx, scratch| {
        sign * (rb.aurc_of(idx, scratch) - ra.aurc_of(idx, scratch))
    })?;
    Ok(summarize_deltas(observed, &stats, config))
}

/// Paired bootstrap of `AURC(b) - AURC(a)`; each resample rebuilds both
/// risk-coverage curves on the same drawn cases.
pub fn bootstrap_aurc(
    a: &[CaseScore],
    b: &[CaseScore],
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    signed_aurc_bootstrap(a, b, 1.0, config)
}

/// [`bootstrap_aurc`] scaled by the direction sign (AURC is lower-better,
/// so `Direction::Lower` reports the improvement of `b`).
pub fn ood_delta_aurc(
    a: &[CaseScore],
    b: &[CaseScore],
    direction: Direction,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    signed_aurc_bootstrap(a, b, direction.sign(), config)
}

/// Unpaired case bootstrap of a single method's mean.
pub fn bootstrap_mean(values: &[f64], config: &BootstrapConfig) -> Result<Summary> {
    if values.len() < 2 {
        return Err(Error::TooFewCases(values.len()));
    }
    let stats = resample_statistic(values.len(), config, |idx, _| mean_at(values, idx))?;
    let (ci_low, ci_high) = interval(&stats);
    Ok(Summary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        ci_low,
        ci_high,
        n: values.len(),
    })
}

/// Unpaired case bootstrap of a single method's AURC.
pub fn bootstrap_aurc_summary(scores: &[CaseScore], config: &BootstrapConfig) -> Result<Summary> {
    if scores.len() < 2 {
        return Err(Error::TooFewCases(scores.len()));
    }
    let ranked = RankedScores::new(scores)?;
    let stats = resample_statistic(scores.len(), config, |idx, scratch| {
        ranked.aurc_of(idx, scratch)
    })?;
    let (ci_low, ci_high) = interval(&stats);
    Ok(Summary {
        mean: aurc(&risk_coverage_curve(scores)?),
        ci_low,
        ci_high,
        n: scores.len(),
    })
}
