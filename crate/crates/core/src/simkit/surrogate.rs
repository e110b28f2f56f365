use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::volume::ProbMap;

use super::phantom::{coords, PhantomCase};

pub const GAP_GAIN: f64 = 4.0;

/// Parametric stand-in for a trained network.
///
/// Logits follow the ground-truth distance field, scaled by `1 / temperature`,
/// plus white noise of scale `sigma_seed` fixed by `seed`. Inside the region
/// of every concept the member was never exposed to, all logits are scaled
/// by `1 - GAP_GAIN * sigma_data * w`, where `w` is the region's weight: the
/// prediction there drifts towards uniform and, once the factor turns
/// negative, towards the wrong class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateMember {
    pub seed: u64,
    pub exposure: BTreeSet<u32>,
    pub sigma_seed: f64,
    pub sigma_data: f64,
    pub temperature: f64,
}

impl SurrogateMember {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.sigma_seed) || !ok(self.sigma_data) {
            return Err(Error::InvalidArgument(
                "sigma_seed and sigma_data must be finite and >= 0".into(),
            ));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidArgument("temperature must be > 0".into()));
        }
        Ok(())
    }

    /// Per-voxel weight of the unexposed concept regions, capped at 1.
    fn gap_weight(&self, case: &PhantomCase) -> Vec<f64> {
        let shape = case.distance.shape();
        let missing: Vec<_> = case
            .concepts
            .iter()
            .filter(|c| !self.exposure.contains(&c.tag))
            .collect();
        (0..case.distance.len())
            .map(|v| {
                if missing.is_empty() {
                    return 0.0;
                }
                let p = coords(shape, v);
                missing.iter().map(|c| c.weight(p)).sum::<f64>().min(1.0)
            })
            .collect()
    }

    /// Voxels whose logits the exposure gap touches.
    pub fn perturbation_support(&self, case: &PhantomCase) -> Vec<bool> {
        self.gap_weight(case).into_iter().map(|w| w > 0.0).collect()
    }
}

/// Predicts `case`. `thresholds` are the dataset's class thresholds; logits
/// are cumulative so class `c` wins where the distance clears `thresholds[c-1]`.
pub fn surrogate_predict(
    member: &SurrogateMember,
    case: &PhantomCase,
    thresholds: &[f64],
) -> Result<ProbMap> {
    member.validate()?;
    let classes = thresholds.len() + 1;
    let shape = case.distance.shape();
    let n = case.distance.len();
    let gap = if member.sigma_data > 0.0 {
        member.gap_weight(case)
    } else {
        vec![0.0; n]
    };
    let mut rng = stream_rng(member.seed, case.index as u64);
    let mut probs = vec![0f32; classes * n];
    let mut logits = vec![0f64; classes];
    for (v, (&d, &w)) in case.distance.data().iter().zip(&gap).enumerate() {
        let mut acc = 0.0;
        for (c, logit) in logits.iter_mut().enumerate() {
            if c > 0 {
                acc += (d - thresholds[c - 1]) / member.temperature;
            }
            let noise: f64 = if member.sigma_seed > 0.0 {
                member.sigma_seed * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            *logit = (acc + noise) * (1.0 - GAP_GAIN * member.sigma_data * w);
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        for (c, l) in logits.iter().enumerate() {
            probs[c * n + v] = ((l - max).exp() / total) as f32;
        }
    }
    ProbMap::new(classes, shape, probs)
}
