//! Scoring one case end to end: aggregation, uncertainty maps and metrics.

use serde::{Deserialize, Serialize};

use crate::ensemble::{
    aggregate_mean, confidence_map, entropy_map, hard_prediction, label_disagreement,
    rater_variance_map, EnsembleBundle, EnsembleKind,
};
use crate::error::{Error, Result};
use crate::metrics::{ace, ba_ece, dsc, ged, ncc, Binning, MetricRecord, SegDistance};
use crate::volume::{LabelMap, ProbMap};

/// Which voxels enter calibration and correlation metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    #[default]
    All,
    /// Union of the foregrounds of the prediction and every rater.
    Foreground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub binning: Binning,
    pub band_radius: usize,
    pub calibration_mask: MaskMode,
    pub ncc_mask: MaskMode,
    pub ged_distance: SegDistance,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            binning: Binning::default(),
            band_radius: 2,
            calibration_mask: MaskMode::All,
            ncc_mask: MaskMode::All,
            ged_distance: SegDistance::Iou,
        }
    }
}

pub struct CaseInput<'a> {
    pub case_id: &'a str,
    pub ood: bool,
    pub classes: usize,
    pub members: &'a [ProbMap],
    pub raters: &'a [LabelMap],
    pub consensus: &'a LabelMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseEvaluation {
    pub record: MetricRecord,
    pub ncc_degenerate: bool,
}

fn foreground_union(prediction: &LabelMap, raters: &[LabelMap]) -> Vec<bool> {
    (0..prediction.len())
        .map(|v| prediction.labels()[v] != 0 || raters.iter().any(|r| r.labels()[v] != 0))
        .collect()
}

pub fn evaluate_case(input: &CaseInput<'_>, options: &EvalOptions) -> Result<CaseEvaluation> {
    let bundle = EnsembleBundle::new(EnsembleKind::Other, input.members.to_vec())?;
    if bundle.classes() != input.classes {
        return Err(Error::ShapeMismatch(format!(
            "members carry {} classes, case declares {}",
            bundle.classes(),
            input.classes
        )));
    }
    let mean = aggregate_mean(&bundle)?;
    let prediction = hard_prediction(&mean);
    let conf = confidence_map(&mean);
    let entropy = entropy_map(&mean);
    let classes = input.classes;

    let fg = foreground_union(&prediction, input.raters);
    let mask_for = |mode: MaskMode| match mode {
        MaskMode::All => None,
        MaskMode::Foreground => Some(fg.as_slice()),
    };

    let seg = dsc(&prediction, input.consensus, classes)?;
    let calib = ace(
        &conf,
        &prediction,
        input.raters,
        mask_for(options.calibration_mask),
        options.binning,
    )?;
    let boundary = match ba_ece(
        &conf,
        &prediction,
        input.raters,
        input.consensus,
        options.band_radius,
        options.binning,
    ) {
        Ok(v) => Some(v),
        Err(Error::EmptyBand) => {
            log::warn!("case `{}`: consensus has no boundary, BA-ECE skipped", input.case_id);
            None
        }
        Err(e) => return Err(e),
    };
    let variance = rater_variance_map(input.raters, classes)?;
    let corr = ncc(&entropy, &variance, mask_for(options.ncc_mask))?;
    let member_labels: Vec<LabelMap> = input.members.iter().map(hard_prediction).collect();
    let energy = ged(&member_labels, input.raters, classes, options.ged_distance)?;
    let u = match label_disagreement(&member_labels, classes) {
        Ok(u) => Some(u),
        Err(Error::SingleMember) => None,
        Err(e) => return Err(e),
    };
    Ok(CaseEvaluation {
        record: MetricRecord {
            case_id: input.case_id.to_owned(),
            ood: input.ood,
            dsc: seg,
            ace: calib,
            ba_ece: boundary,
            ncc: corr.value,
            ged: energy,
            u,
            r: 1.0 - seg,
        },
        ncc_degenerate: corr.degenerate,
    })
}
