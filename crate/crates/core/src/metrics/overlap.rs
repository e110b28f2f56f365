use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::LabelMap;

/// Per-class voxel counts for two label maps.
struct OverlapCounts {
    a: Vec<u64>,
    b: Vec<u64>,
    both: Vec<u64>,
}

fn overlap_counts(a: &LabelMap, b: &LabelMap, classes: usize) -> Result<OverlapCounts> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut counts = OverlapCounts {
        a: vec![0; 256],
        b: vec![0; 256],
        both: vec![0; 256],
    };
    for (&la, &lb) in a.labels().iter().zip(b.labels()) {
        counts.a[usize::from(la)] += 1;
        counts.b[usize::from(lb)] += 1;
        if la == lb {
            counts.both[usize::from(la)] += 1;
        }
    }
    for (map, tally) in [(a, &counts.a), (b, &counts.b)] {
        if let Some(label) = (classes..256).find(|&l| tally[l] > 0) {
            let voxel = map
                .labels()
                .iter()
                .position(|&l| usize::from(l) == label)
                .unwrap_or(0);
            return Err(Error::LabelOutOfRange {
                voxel,
                label: label as u8,
                classes,
            });
        }
    }
    Ok(counts)
}

fn mean_foreground(classes: usize, per_class: impl Fn(usize) -> f64) -> f64 {
    (1..classes).map(per_class).sum::<f64>() / (classes - 1) as f64
}

/// Dice overlap averaged over foreground classes `1..classes`.
///
/// A class absent from both maps scores 1.
pub fn dsc(a: &LabelMap, b: &LabelMap, classes: usize) -> Result<f64> {
    check_class_count(classes)?;
    let n = overlap_counts(a, b, classes)?;
    Ok(mean_foreground(classes, |c| {
        let denom = n.a[c] + n.b[c];
        if denom == 0 {
            1.0
        } else {
            2.0 * n.both[c] as f64 / denom as f64
        }
    }))
}

/// Jaccard overlap averaged over foreground classes; both-empty scores 1.
pub fn iou(a: &LabelMap, b: &LabelMap, classes: usize) -> Result<f64> {
    check_class_count(classes)?;
    let n = overlap_counts(a, b, classes)?;
    Ok(mean_foreground(classes, |c| {
        let union = n.a[c] + n.b[c] - n.both[c];
        if union == 0 {
            1.0
        } else {
            n.both[c] as f64 / union as f64
        }
    }))
}

fn check_class_count(classes: usize) -> Result<()> {
    if classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "overlap needs at least 2 classes, got {classes}"
        )));
    }
    Ok(())
}

/// Segmentation distance used inside the generalized energy distance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegDistance {
    /// `1 - IoU`
    #[default]
    Iou,
    /// `1 - DSC`
    Dice,
}

impl SegDistance {
    pub fn distance(self, a: &LabelMap, b: &LabelMap, classes: usize) -> Result<f64> {
        Ok(1.0
            - match self {
                SegDistance::Iou => iou(a, b, classes)?,
                SegDistance::Dice => dsc(a, b, classes)?,
            })
    }
}
