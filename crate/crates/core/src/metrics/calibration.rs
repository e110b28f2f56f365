//! Voxel-level calibration: binned confidence against rater-averaged accuracy.
//!
//! The accuracy of a bin is the fraction of (voxel, rater) pairs in the bin
//! where the ensemble's hard prediction matches that rater's label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::consensus::check_same_shape;
use crate::volume::{LabelMap, ScalarMap, Shape};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinningScheme {
    /// `n_bins` intervals of width `1/n_bins`; confidence 1.0 falls in the last.
    #[default]
    EqualWidth,
    /// Voxels sorted by confidence and cut into `n_bins` rank ranges of
    /// near-equal size.
    EqualMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binning {
    pub n_bins: usize,
    pub scheme: BinningScheme,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            n_bins: 10,
            scheme: BinningScheme::EqualWidth,
        }
    }
}

impl Binning {
    pub fn new(n_bins: usize, scheme: BinningScheme) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidArgument("need at least one bin".into()));
        }
        Ok(Self { n_bins, scheme })
    }

    pub fn equal_width(n_bins: usize) -> Self {
        Self {
            n_bins,
            scheme: BinningScheme::EqualWidth,
        }
    }

    /// Bin of a confidence value under the equal-width scheme.
    pub fn equal_width_index(&self, conf: f64) -> usize {
        let b = (conf * self.n_bins as f64).floor();
        if b < 0.0 {
            0
        } else {
            (b as usize).min(self.n_bins - 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub count: usize,
    pub mean_confidence: f64,
    pub accuracy: f64,
}

impl Bin {
    pub fn gap(&self) -> f64 {
        (self.accuracy - self.mean_confidence).abs()
    }
}

/// Filled calibration bins over one evaluation domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBinning {
    pub bins: Vec<Bin>,
    pub total: usize,
}

impl CalibrationBinning {
    /// Unweighted mean gap over non-empty bins.
    pub fn ace(&self) -> f64 {
        let filled: Vec<&Bin> = self.bins.iter().filter(|b| b.count > 0).collect();
        filled.iter().map(|b| b.gap()).sum::<f64>() / filled.len() as f64
    }

    /// Mass-weighted mean gap.
    pub fn ece(&self) -> f64 {
        self.bins
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| b.count as f64 / self.total as f64 * b.gap())
            .sum()
    }
}

#[derive(Default, Clone, Copy)]
struct Accumulator {
    count: usize,
    conf_sum: f64,
    agree: u64,
}

/// Bins every voxel where `domain` is true (all voxels when `None`).
pub fn calibration_bins(
    conf: &ScalarMap,
    prediction: &LabelMap,
    raters: &[LabelMap],
    domain: Option<&[bool]>,
    binning: Binning,
) -> Result<CalibrationBinning> {
    if binning.n_bins == 0 {
        return Err(Error::InvalidArgument("binning needs at least one bin".into()));
    }
    if raters.is_empty() {
        return Err(Error::TooFewRaters(0));
    }
    let mut maps: Vec<&LabelMap> = vec![prediction];
    maps.extend(raters);
    check_same_shape(&maps)?;
    if conf.shape() != prediction.shape() {
        return Err(Error::ShapeMismatch(format!(
            "confidence {:?} vs prediction {:?}",
            conf.shape(),
            prediction.shape()
        )));
    }
    if domain.is_some_and(|d| d.len() != conf.len()) {
        return Err(Error::ShapeMismatch("domain mask length".into()));
    }

    let voxels: Vec<usize> = match domain {
        Some(mask) => (0..conf.len()).filter(|&v| mask[v]).collect(),
        None => (0..conf.len()).collect(),
    };
    if voxels.is_empty() {
        return Err(Error::NoVoxels);
    }

    let c = conf.data();
    let pred = prediction.labels();
    let agreement =
        |v: usize| -> u64 { raters.iter().filter(|r| r.labels()[v] == pred[v]).count() as u64 };

    let mut acc = vec![Accumulator::default(); binning.n_bins];
    match binning.scheme {
        BinningScheme::EqualWidth => {
            for &v in &voxels {
                let slot = &mut acc[binning.equal_width_index(c[v])];
                slot.count += 1;
                slot.conf_sum += c[v];
                slot.agree += agreement(v);
            }
        }
        BinningScheme::EqualMass => {
            let mut ranked = voxels.clone();
            ranked.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
            let n = ranked.len();
            for (rank, &v) in ranked.iter().enumerate() {
                let slot = &mut acc[rank * binning.n_bins / n];
                slot.count += 1;
                slot.conf_sum += c[v];
                slot.agree += agreement(v);
            }
        }
    }

    let raters_n = raters.len() as f64;
    let bins = acc
        .into_iter()
        .map(|a| {
            if a.count == 0 {
                Bin {
                    count: 0,
                    mean_confidence: 0.0,
                    accuracy: 0.0,
                }
            } else {
                Bin {
                    count: a.count,
                    mean_confidence: a.conf_sum / a.count as f64,
                    accuracy: a.agree as f64 / (a.count as f64 * raters_n),
                }
            }
        })
        .collect();
    Ok(CalibrationBinning {
        bins,
        total: voxels.len(),
    })
}

/// Average calibration error: mean |accuracy - confidence| over non-empty bins.
pub fn ace(
    conf: &ScalarMap,
    prediction: &LabelMap,
    raters: &[LabelMap],
    domain: Option<&[bool]>,
    binning: Binning,
) -> Result<f64> {
    Ok(calibration_bins(conf, prediction, raters, domain, binning)?.ace())
}

/// Expected calibration error restricted to the band of voxels within
/// Chebyshev distance `band_radius` of the consensus label boundary.
pub fn ba_ece(
    conf: &ScalarMap,
    prediction: &LabelMap,
    raters: &[LabelMap],
    consensus: &LabelMap,
    band_radius: usize,
    binning: Binning,
) -> Result<f64> {
    if band_radius == 0 {
        return Err(Error::InvalidArgument("band radius must be at least 1".into()));
    }
    if consensus.shape() != prediction.shape() {
        return Err(Error::ShapeMismatch(format!(
            "consensus {:?} vs prediction {:?}",
            consensus.shape(),
            prediction.shape()
        )));
    }
    let band = boundary_band(consensus, band_radius);
    if !band.iter().any(|&b| b) {
        return Err(Error::EmptyBand);
    }
    Ok(calibration_bins(conf, prediction, raters, Some(&band), binning)?.ece())
}

/// Sliding-window extremum along one axis with the given radius.
fn window_filter<T: Copy>(
    data: &[T],
    shape: Shape,
    axis: usize,
    radius: usize,
    pick: impl Fn(T, T) -> T,
) -> Vec<T> {
    let strides = [shape[1] * shape[2], shape[2], 1];
    let len = shape[axis];
    let stride = strides[axis];
    let mut out = data.to_vec();
    for base in 0..data.len() {
        // visit each line once, from its first voxel
        if (base / stride) % len != 0 {
            continue;
        }
        for i in 0..len {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(len - 1);
            let mut best = data[base + lo * stride];
            for j in lo + 1..=hi {
                best = pick(best, data[base + j * stride]);
            }
            out[base + i * stride] = best;
        }
    }
    out
}

fn box_filter<T: Copy>(data: &[T], shape: Shape, radius: usize, pick: impl Fn(T, T) -> T + Copy) -> Vec<T> {
    let mut cur = data.to_vec();
    for axis in 0..3 {
        cur = window_filter(&cur, shape, axis, radius, pick);
    }
    cur
}

/// Voxels with at least one face, edge or corner neighbour carrying a
/// different label.
pub fn boundary_voxels(labels: &LabelMap) -> Vec<bool> {
    let shape = labels.shape();
    let hi = box_filter(labels.labels(), shape, 1, u8::max);
    let lo = box_filter(labels.labels(), shape, 1, u8::min);
    hi.iter().zip(&lo).map(|(a, b)| a != b).collect()
}

/// Boundary voxels dilated by a cube of half-width `radius`.
pub fn boundary_band(labels: &LabelMap, radius: usize) -> Vec<bool> {
    let boundary = boundary_voxels(labels);
    box_filter(&boundary, labels.shape(), radius, |a, b| a | b)
}
