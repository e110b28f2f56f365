//! Member aggregation and voxelwise uncertainty maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::dsc;
use crate::volume::{validate_prob_map, LabelMap, ProbMap, ScalarMap, Volume};

/// How an ensemble's members were trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    /// One member per cross-validation fold.
    Cv,
    /// Members trained on the same data with different seeds.
    De,
    Other,
}

impl EnsembleKind {
    pub fn label(self) -> &'static str {
        match self {
            EnsembleKind::Cv => "cv",
            EnsembleKind::De => "de",
            EnsembleKind::Other => "other",
        }
    }

    pub fn display(self) -> &'static str {
        match self {
            EnsembleKind::Cv => "CV",
            EnsembleKind::De => "DE",
            EnsembleKind::Other => "Other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleBundle {
    kind: EnsembleKind,
    members: Vec<ProbMap>,
}

impl EnsembleBundle {
    pub fn new(kind: EnsembleKind, members: Vec<ProbMap>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        if let Some((m, other)) = members
            .iter()
            .enumerate()
            .find(|(_, p)| p.dims() != first.dims())
        {
            return Err(Error::ShapeMismatch(format!(
                "member {m} has extent {:?}, member 0 has {:?}",
                other.dims(),
                first.dims()
            )));
        }
        Ok(Self { kind, members })
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn members(&self) -> &[ProbMap] {
        &self.members
    }

    pub fn classes(&self) -> usize {
        self.members[0].classes()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Voxelwise mean of the member distributions.
///
/// Each voxel's member values are summed in ascending order in `f64` and
/// the mean is rounded once to `f32`, so the result does not depend on
/// member order.
pub fn aggregate_mean(bundle: &EnsembleBundle) -> Result<ProbMap> {
    let members = bundle.members();
    let first = &members[0];
    let m = members.len();
    let mut scratch = vec![0f32; m];
    let data: Vec<f32> = (0..first.data().len())
        .map(|i| {
            for (slot, p) in scratch.iter_mut().zip(members) {
                *slot = p.data()[i];
            }
            scratch.sort_unstable_by(f32::total_cmp);
            let sum: f64 = scratch.iter().map(|&v| f64::from(v)).sum();
            (sum / m as f64) as f32
        })
        .collect();
    let mean = ProbMap::from_parts(first.classes(), first.shape(), data)?
        .with_spacing(first.spacing())?;
    validate_prob_map(mean)
}

/// Per-voxel argmax; ties go to the lowest class index.
pub fn hard_prediction(mean: &ProbMap) -> LabelMap {
    let n = mean.voxels();
    let mut best = vec![0u8; n];
    let mut best_p: Vec<f32> = mean.channel(0).to_vec();
    for c in 1..mean.classes() {
        for (v, &p) in mean.channel(c).iter().enumerate() {
            if p > best_p[v] {
                best_p[v] = p;
                best[v] = c as u8;
            }
        }
    }
    let vol = Volume::new(mean.shape(), best)
        .and_then(|v| v.with_spacing(mean.spacing()))
        .expect("extent comes from a valid map");
    LabelMap::new(vol, mean.classes()).expect("argmax is below the class count")
}

/// `max_c p(v)`.
pub fn confidence_map(mean: &ProbMap) -> ScalarMap {
    let mut conf: Vec<f64> = mean.channel(0).iter().map(|&p| f64::from(p)).collect();
    for c in 1..mean.classes() {
        for (slot, &p) in conf.iter_mut().zip(mean.channel(c)) {
            *slot = slot.max(f64::from(p));
        }
    }
    scalar_like(mean, conf)
}

/// Shannon entropy normalized by `ln C`, with `0 ln 0 = 0`.
pub fn entropy_map(mean: &ProbMap) -> ScalarMap {
    let mut h = vec![0f64; mean.voxels()];
    for c in 0..mean.classes() {
        for (slot, &p) in h.iter_mut().zip(mean.channel(c)) {
            let p = f64::from(p);
            if p > 0.0 {
                *slot -= p * p.ln();
            }
        }
    }
    let norm = (mean.classes() as f64).ln();
    h.iter_mut().for_each(|v| *v /= norm);
    scalar_like(mean, h)
}

fn scalar_like(mean: &ProbMap, data: Vec<f64>) -> ScalarMap {
    Volume::new(mean.shape(), data)
        .and_then(|v| v.with_spacing(mean.spacing()))
        .expect("extent comes from a valid map")
}

/// Rater disagreement per voxel: `sum_c f_c (1 - f_c)` where `f_c` is the
/// fraction of raters assigning class `c`.
pub fn rater_variance_map(raters: &[LabelMap], classes: usize) -> Result<ScalarMap> {
    if raters.len() < 2 {
        return Err(Error::TooFewRaters(raters.len()));
    }
    let first = &raters[0];
    if let Some(r) = raters.iter().find(|r| r.shape() != first.shape()) {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            first.shape(),
            r.shape()
        )));
    }
    let n = raters.len() as u64;
    let mut counts = vec![0u64; classes];
    let mut out = Vec::with_capacity(first.len());
    for v in 0..first.len() {
        counts.iter_mut().for_each(|c| *c = 0);
        for r in raters {
            let l = usize::from(r.labels()[v]);
            if l >= classes {
                return Err(Error::LabelOutOfRange {
                    voxel: v,
                    label: l as u8,
                    classes,
                });
            }
            counts[l] += 1;
        }
        let spread: u64 = counts.iter().map(|&k| k * (n - k)).sum();
        out.push(spread as f64 / (n * n) as f64);
    }
    Volume::new(first.shape(), out)?.with_spacing(first.spacing())
}

/// Mean `1 - DSC` over unordered pairs of hard member predictions.
pub fn pairwise_disagreement(bundle: &EnsembleBundle, classes: usize) -> Result<f64> {
    let hard: Vec<LabelMap> = bundle.members().iter().map(hard_prediction).collect();
    label_disagreement(&hard, classes)
}

/// [`pairwise_disagreement`] for members already reduced to label maps.
pub fn label_disagreement(members: &[LabelMap], classes: usize) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if members.len() < 2 {
        return Err(Error::SingleMember);
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            sum += 1.0 - dsc(&members[i], &members[j], classes)?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}
