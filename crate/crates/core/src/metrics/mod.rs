//! Case-level segmentation and uncertainty metrics.

mod calibration;
mod consensus;
mod correlation;
mod energy;
mod overlap;

use serde::{Deserialize, Serialize};

pub use calibration::{
    ace, ba_ece, boundary_band, boundary_voxels, calibration_bins, Bin, Binning, BinningScheme,
    CalibrationBinning,
};
pub use consensus::majority_consensus;
pub use correlation::{ncc, Correlation};
pub use energy::ged;
pub use overlap::{dsc, iou, SegDistance};

/// Metric values for one case under one ensemble configuration.
///
/// `ba_ece` is absent when the consensus has no boundary and `u` when the
/// ensemble has a single member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub case_id: String,
    pub ood: bool,
    pub dsc: f64,
    pub ace: f64,
    pub ba_ece: Option<f64>,
    pub ncc: f64,
    pub ged: f64,
    pub u: Option<f64>,
    pub r: f64,
}
