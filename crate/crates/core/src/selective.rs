//! Case-level failure detection: risk-coverage curves and AURC.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uncertainty and risk of one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseScore {
    pub case_id: String,
    /// Inter-model disagreement; cases with lower `u` are retained first.
    pub u: f64,
    /// `1 - DSC(prediction, consensus)`.
    pub r: f64,
}

impl CaseScore {
    pub fn new(case_id: impl Into<String>, u: f64, r: f64) -> Self {
        Self {
            case_id: case_id.into(),
            u,
            r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub coverage: f64,
    pub risk: f64,
}

/// Mean risk of the `k` most certain cases at coverage `k / n`, `k = 1..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskCoverageCurve {
    points: Vec<CurvePoint>,
    order: Vec<String>,
}

impl RiskCoverageCurve {
    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    /// Case ids in retention order.
    pub fn order(&self) -> &[String] {
        &self.order
    }
}

fn check_finite(scores: &[CaseScore]) -> Result<()> {
    match scores.iter().find(|s| !s.u.is_finite() || !s.r.is_finite()) {
        Some(s) => Err(Error::InvalidArgument(format!(
            "case `{}` has non-finite u or r",
            s.case_id
        ))),
        None => Ok(()),
    }
}

/// Retention order: ascending `u`, then ascending case id, then input order.
fn retention_order(scores: &[CaseScore]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[a]
            .u
            .total_cmp(&scores[b].u)
            .then_with(|| scores[a].case_id.cmp(&scores[b].case_id))
    });
    idx
}

fn prefix_mean_risks(risks: impl Iterator<Item = f64>, n: usize) -> Vec<CurvePoint> {
    let mut sum = 0.0;
    risks
        .enumerate()
        .map(|(i, r)| {
            sum += r;
            let k = (i + 1) as f64;
            CurvePoint {
                coverage: k / n as f64,
                risk: sum / k,
            }
        })
        .collect()
}

pub fn risk_coverage_curve(scores: &[CaseScore]) -> Result<RiskCoverageCurve> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_finite(scores)?;
    let order = retention_order(scores);
    Ok(RiskCoverageCurve {
        points: prefix_mean_risks(order.iter().map(|&i| scores[i].r), scores.len()),
        order: order.iter().map(|&i| scores[i].case_id.clone()).collect(),
    })
}

/// Discrete area under the curve: the mean risk over the `n` coverage levels.
pub fn aurc(curve: &RiskCoverageCurve) -> f64 {
    curve.points.iter().map(|p| p.risk).sum::<f64>() / curve.points.len() as f64
}

/// Scores prepared for repeated AURC evaluation on resampled case multisets.
pub(crate) struct RankedScores {
    u: Vec<f64>,
    r: Vec<f64>,
    id_rank: Vec<usize>,
}

impl RankedScores {
    pub(crate) fn new(scores: &[CaseScore]) -> Result<Self> {
        check_finite(scores)?;
        let mut by_id: Vec<usize> = (0..scores.len()).collect();
        by_id.sort_by(|&a, &b| scores[a].case_id.cmp(&scores[b].case_id));
        let mut id_rank = vec![0; scores.len()];
        for (rank, &i) in by_id.iter().enumerate() {
            id_rank[i] = rank;
        }
        Ok(Self {
            u: scores.iter().map(|s| s.u).collect(),
            r: scores.iter().map(|s| s.r).collect(),
            id_rank,
        })
    }

    fn cmp(&self, a: usize, b: usize) -> Ordering {
        self.u[a]
            .total_cmp(&self.u[b])
            .then_with(|| self.id_rank[a].cmp(&self.id_rank[b]))
    }

    /// AURC of the curve rebuilt on the cases at `indices` (with repeats).
    pub(crate) fn aurc_of(&self, indices: &[usize], scratch: &mut Vec<usize>) -> f64 {
        scratch.clear();
        scratch.extend_from_slice(indices);
        scratch.sort_by(|&a, &b| self.cmp(a, b));
        let n = scratch.len();
        let mut sum = 0.0;
        let mut area = 0.0;
        for (i, &c) in scratch.iter().enumerate() {
            sum += self.r[c];
            area += sum / (i + 1) as f64;
        }
        area / n as f64
    }
}
