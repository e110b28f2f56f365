//! Training plans for the two ensemble constructions.
//!
//! Multi-rater datasets are expanded to one training item per
//! (image, rater) pair. Cross-validation folds group items by image so that
//! no image reaches a fold's training and validation sets through different
//! rater labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{shuffle, stream_rng};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrainingItem {
    pub item_id: String,
    pub image_id: String,
    pub rater_id: String,
}

impl TrainingItem {
    pub fn new(
        item_id: impl Into<String>,
        image_id: impl Into<String>,
        rater_id: impl Into<String>,
    ) -> Self {
        Self {
            item_id: item_id.into(),
            image_id: image_id.into(),
            rater_id: rater_id.into(),
        }
    }
}

/// One fold in the `splits_final.json` layout: item ids to train on and to
/// validate on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub val: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub items: Vec<TrainingItem>,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// Fold index whose validation set holds each image.
    pub fn val_fold_of_image(&self) -> BTreeMap<String, usize> {
        let image_of: BTreeMap<&str, &str> = self
            .items
            .iter()
            .map(|i| (i.item_id.as_str(), i.image_id.as_str()))
            .collect();
        let mut out = BTreeMap::new();
        for (k, fold) in self.folds.iter().enumerate() {
            for id in &fold.val {
                if let Some(img) = image_of.get(id.as_str()) {
                    out.entry((*img).to_owned()).or_insert(k);
                }
            }
        }
        out
    }
}

fn check_unique(items: &[TrainingItem]) -> Result<()> {
    let mut ids = BTreeSet::new();
    let mut pairs = BTreeSet::new();
    for it in items {
        if !ids.insert(&it.item_id) {
            return Err(Error::InvalidArgument(format!(
                "duplicate item id `{}`",
                it.item_id
            )));
        }
        if !pairs.insert((&it.image_id, &it.rater_id)) {
            return Err(Error::InvalidArgument(format!(
                "duplicate (image, rater) pair ({}, {})",
                it.image_id, it.rater_id
            )));
        }
    }
    Ok(())
}

/// Image-grouped K-fold split.
///
/// Distinct image ids are sorted, shuffled with the `(seed, 0)` stream, and
/// dealt round-robin to the folds. Item lists inside each fold are sorted
/// by item id, so the result does not depend on input order.
pub fn grouped_kfold(items: &[TrainingItem], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    check_unique(items)?;
    let mut images: Vec<&str> = items
        .iter()
        .map(|i| i.image_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if images.len() < k {
        return Err(Error::TooFewGroups {
            groups: images.len(),
            folds: k,
        });
    }
    shuffle(&mut stream_rng(seed, 0), &mut images);
    let fold_of: BTreeMap<&str, usize> = images
        .iter()
        .enumerate()
        .map(|(i, img)| (*img, i % k))
        .collect();

    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    let folds = (0..k)
        .map(|f| {
            let (val, train): (Vec<&TrainingItem>, Vec<&TrainingItem>) = sorted
                .iter()
                .partition(|it| fold_of[it.image_id.as_str()] == f);
            Fold {
                train: train.iter().map(|i| i.item_id.clone()).collect(),
                val: val.iter().map(|i| i.item_id.clone()).collect(),
            }
        })
        .collect();
    Ok(FoldPlan {
        items: sorted,
        folds,
    })
}

/// One deep-ensemble member: the full item set and its own seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeMember {
    pub seed: u64,
    pub train: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DePlan {
    pub members: Vec<DeMember>,
}

/// `m` members trained on every item, seeded `base_seed + i`.
pub fn de_plan(items: &[TrainingItem], m: usize, base_seed: u64) -> Result<DePlan> {
    if m == 0 {
        return Err(Error::InvalidArgument("deep ensemble needs at least one member".into()));
    }
    let train: Vec<String> = items.iter().map(|i| i.item_id.clone()).collect();
    Ok(DePlan {
        members: (0..m as u64)
            .map(|i| DeMember {
                seed: base_seed.wrapping_add(i),
                train: train.clone(),
            })
            .collect(),
    })
}

/// A problem found by [`audit_leakage`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// The image has items in both the training and validation set of a fold.
    Leakage { fold: usize, image_id: String },
    /// The item is not in exactly one validation set.
    Partition { item_id: String, val_sets: usize },
    /// The plan references an item id missing from its item table.
    UnknownItem { fold: usize, item_id: String },
}

pub fn audit_leakage(plan: &FoldPlan) -> Vec<Violation> {
    let image_of: BTreeMap<&str, &str> = plan
        .items
        .iter()
        .map(|i| (i.item_id.as_str(), i.image_id.as_str()))
        .collect();
    let mut violations = Vec::new();
    let mut val_count: BTreeMap<&str, usize> = image_of.keys().map(|k| (*k, 0)).collect();

    for (f, fold) in plan.folds.iter().enumerate() {
        let mut images = |ids: &[String]| -> BTreeSet<&str> {
            let mut set = BTreeSet::new();
            for id in ids {
                match image_of.get(id.as_str()) {
                    Some(img) => {
                        set.insert(*img);
                    }
                    None => violations.push(Violation::UnknownItem {
                        fold: f,
                        item_id: id.clone(),
                    }),
                }
            }
            set
        };
        let train = images(&fold.train);
        let val = images(&fold.val);
        for img in train.intersection(&val) {
            violations.push(Violation::Leakage {
                fold: f,
                image_id: (*img).to_owned(),
            });
        }
        for id in &fold.val {
            if let Some(c) = val_count.get_mut(id.as_str()) {
                *c += 1;
            }
        }
    }
    for (item, count) in val_count {
        if count != 1 {
            violations.push(Violation::Partition {
                item_id: item.to_owned(),
                val_sets: count,
            });
        }
    }
    violations
}
