use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::case::{evaluate_case, CaseInput, EvalOptions};
use crate::error::Result;
use crate::metrics::MetricRecord;
use crate::rng::{derive_seed, label_tag};
use crate::splits::{de_plan, grouped_kfold, FoldPlan, TrainingItem};
use crate::volume::ProbMap;

use super::phantom::{make_phantom_dataset, PhantomCase, PhantomDataset, PhantomSpec};
use super::surrogate::{surrogate_predict, SurrogateMember};

/// Ensemble construction and member noise for a simulated comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Cross-validation folds `K`.
    pub folds: usize,
    /// Deep-ensemble members `M`.
    pub members: usize,
    pub sigma_seed: f64,
    pub sigma_data: f64,
    pub temperature: f64,
    /// Seeds fold assignment and every member.
    pub seed: u64,
    #[serde(skip)]
    pub options: EvalOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            members: 5,
            sigma_seed: 0.1,
            sigma_data: 0.5,
            temperature: 1.0,
            seed: 0,
            options: EvalOptions::default(),
        }
    }
}

/// The two surrogate ensembles built from one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateEnsembles {
    pub plan: FoldPlan,
    pub cv: Vec<SurrogateMember>,
    pub de: Vec<SurrogateMember>,
}

impl SurrogateEnsembles {
    pub fn predict(&self, case: &PhantomCase, thresholds: &[f64]) -> Result<(Vec<ProbMap>, Vec<ProbMap>)> {
        let run = |members: &[SurrogateMember]| {
            members
                .iter()
                .map(|m| surrogate_predict(m, case, thresholds))
                .collect::<Result<Vec<_>>>()
        };
        Ok((run(&self.cv)?, run(&self.de)?))
    }
}

/// One training item per (ID case, rater).
pub fn training_items(dataset: &PhantomDataset) -> Vec<TrainingItem> {
    dataset
        .cases
        .iter()
        .filter(|c| !c.ood)
        .flat_map(|c| {
            (0..c.raters.len())
                .map(move |r| TrainingItem::new(format!("{}_r{r}", c.id), c.id.clone(), format!("r{r}")))
        })
        .collect()
}

/// Builds both ensembles. CV member `k` is exposed to the concepts of the
/// images in fold `k`'s training set; every DE member sees all ID concepts.
pub fn build_ensembles(dataset: &PhantomDataset, config: &ExperimentConfig) -> Result<SurrogateEnsembles> {
    let items = training_items(dataset);
    let plan = grouped_kfold(&items, config.folds, derive_seed(config.seed, label_tag("folds")))?;
    let de = de_plan(&items, config.members, derive_seed(config.seed, label_tag("de")))?;

    let tags_of: BTreeMap<&str, Vec<u32>> = dataset
        .cases
        .iter()
        .map(|c| (c.id.as_str(), c.concept_tags().collect()))
        .collect();
    let image_of: BTreeMap<&str, &str> = items
        .iter()
        .map(|i| (i.item_id.as_str(), i.image_id.as_str()))
        .collect();
    let exposure_of = |train: &[String]| -> BTreeSet<u32> {
        train
            .iter()
            .flat_map(|id| tags_of[image_of[id.as_str()]].iter().copied())
            .collect()
    };
    let member = |seed: u64, exposure: BTreeSet<u32>| SurrogateMember {
        seed,
        exposure,
        sigma_seed: config.sigma_seed,
        sigma_data: config.sigma_data,
        temperature: config.temperature,
    };

    let cv_base = derive_seed(config.seed, label_tag("cv"));
    let cv = plan
        .folds
        .iter()
        .enumerate()
        .map(|(k, fold)| member(cv_base.wrapping_add(k as u64), exposure_of(&fold.train)))
        .collect();
    let de = de
        .members
        .iter()
        .map(|m| member(m.seed, exposure_of(&m.train)))
        .collect();
    Ok(SurrogateEnsembles { plan, cv, de })
}

/// Per-case records of both ensembles, in case order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub cv: Vec<MetricRecord>,
    pub de: Vec<MetricRecord>,
}

/// Scores every case of `dataset` with both ensembles.
pub fn run_on_dataset(dataset: &PhantomDataset, config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let ensembles = build_ensembles(dataset, config)?;
    let classes = dataset.spec.classes;
    let pairs = dataset
        .cases
        .par_iter()
        .map(|case| {
            let (cv, de) = ensembles.predict(case, &dataset.thresholds)?;
            let score = |members: &[ProbMap]| {
                evaluate_case(
                    &CaseInput {
                        case_id: &case.id,
                        ood: case.ood,
                        classes,
                        members,
                        raters: &case.raters,
                        consensus: &case.consensus,
                    },
                    &config.options,
                )
                .map(|e| e.record)
            };
            Ok((score(&cv)?, score(&de)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (cv, de) = pairs.into_iter().unzip();
    Ok(ExperimentOutcome { cv, de })
}

/// Generates the dataset for `spec` and runs [`run_on_dataset`].
pub fn run_experiment(spec: &PhantomSpec, config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_on_dataset(&make_phantom_dataset(spec)?, config)
}
