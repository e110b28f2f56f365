use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleKind;
use crate::error::{Error, Result};
use crate::metrics::MetricRecord;
use crate::rng::{derive_seed, label_tag};
use crate::selective::{risk_coverage_curve, CaseScore, CurvePoint};
use crate::stats::{
    bootstrap_aurc, bootstrap_aurc_summary, bootstrap_mean, ood_delta, ood_delta_aurc,
    paired_bootstrap, BootstrapConfig, BootstrapResult, Direction, PairedSample, Summary,
};

pub const REPORT_SCHEMA: &str = "uqseg-report/v1";

/// Metrics a report can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Dsc,
    Ace,
    BaEce,
    Ncc,
    Ged,
    Aurc,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Dsc,
        Metric::Ace,
        Metric::BaEce,
        Metric::Ncc,
        Metric::Ged,
        Metric::Aurc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Dsc => "DSC",
            Metric::Ace => "ACE",
            Metric::BaEce => "BA-ECE",
            Metric::Ncc => "NCC",
            Metric::Ged => "GED",
            Metric::Aurc => "AURC",
        }
    }

    pub fn task(self) -> &'static str {
        match self {
            Metric::Dsc => "SEG",
            Metric::Ace | Metric::BaEce => "CAL",
            Metric::Ncc | Metric::Ged => "AM",
            Metric::Aurc => "FD",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Metric::Dsc | Metric::Ncc => Direction::Higher,
            _ => Direction::Lower,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::UnknownMetric(name.to_owned()))
    }

    /// Per-case value, when the record has one.
    pub fn value(self, r: &MetricRecord) -> Option<f64> {
        match self {
            Metric::Dsc => Some(r.dsc),
            Metric::Ace => Some(r.ace),
            Metric::BaEce => r.ba_ece,
            Metric::Ncc => Some(r.ncc),
            Metric::Ged => Some(r.ged),
            Metric::Aurc => None,
        }
    }
}

/// Per-metric sign `s` for OOD deltas, defaulting to each metric's direction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OodDirections {
    overrides: BTreeMap<Metric, Direction>,
}

impl OodDirections {
    /// Parses a JSON object mapping metric names to `+1` or `-1`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, i32> = serde_json::from_str(text)
            .map_err(|e| Error::Schema(format!("direction file: {e}")))?;
        let mut overrides = BTreeMap::new();
        for (name, s) in raw {
            overrides.insert(Metric::parse(&name)?, Direction::from_sign(s)?);
        }
        Ok(Self { overrides })
    }

    pub fn get(&self, metric: Metric) -> Direction {
        self.overrides.get(&metric).copied().unwrap_or(metric.direction())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Id,
    Ood,
    /// Both splits pooled; only used for referral curves.
    All,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::Id => "id",
            Split::Ood => "ood",
            Split::All => "all",
        }
    }
}

/// One (metric, split) entry.
///
/// `cv` and `de` are unpaired case-bootstrap summaries. On the ID split
/// `delta` is the paired bootstrap of `DE - CV`; on the OOD split it is the
/// DE improvement `(DE - CV) * sign`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub task: String,
    pub direction: Direction,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub de: Option<Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<BootstrapResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub kind: EnsembleKind,
    pub group: String,
    #[serde(flatten)]
    pub record: MetricRecord,
    #[serde(default)]
    pub ncc_degenerate: bool,
}

/// Risk-coverage curve of one ensemble on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub kind: EnsembleKind,
    pub split: Split,
    pub order: Vec<String>,
    pub points: Vec<CurvePoint>,
}

/// Settings that shaped a report, kept for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub resamples: usize,
    pub seed: u64,
    pub bins: usize,
    pub binning: String,
    pub band_radius: usize,
    pub calibration_mask: String,
    pub ncc_mask: String,
    pub ged_distance: String,
    #[serde(default)]
    pub include_ood: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema: String,
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub settings: ReportSettings,
    pub metrics: Vec<MetricRow>,
    #[serde(default)]
    pub cases: Vec<CaseRow>,
    #[serde(default)]
    pub curves: Vec<CurveRecord>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Per-case records of one ensemble, aligned with the case list.
pub struct KindRecords<'a> {
    pub kind: EnsembleKind,
    pub records: &'a [MetricRecord],
    pub ncc_degenerate: &'a [bool],
}

pub struct ReportInput<'a> {
    pub dataset: &'a str,
    pub source: Option<&'a str>,
    pub groups: &'a [String],
    pub cv: Option<KindRecords<'a>>,
    pub de: Option<KindRecords<'a>>,
    pub settings: ReportSettings,
    pub directions: &'a OodDirections,
    pub bootstrap: BootstrapConfig,
    /// Also emit referral curves over ID and OOD cases pooled.
    pub include_ood: bool,
}

fn scores(records: &[&MetricRecord]) -> Option<Vec<CaseScore>> {
    records
        .iter()
        .map(|r| r.u.map(|u| CaseScore::new(r.case_id.clone(), u, r.r)))
        .collect()
}

/// Seed for one (metric, split); both summaries and the delta share it, so
/// swapping the two ensembles mirrors every row exactly.
fn row_seed(base: u64, metric: Metric, split: Split) -> u64 {
    derive_seed(base, label_tag(&format!("{}/{}", metric.name(), split.label())))
}

struct SplitData<'a> {
    cv: Option<Vec<&'a MetricRecord>>,
    de: Option<Vec<&'a MetricRecord>>,
}

fn summary(metric: Metric, records: &[&MetricRecord], config: &BootstrapConfig) -> Result<Option<Summary>> {
    if metric == Metric::Aurc {
        return match scores(records) {
            Some(s) if s.len() >= 2 => bootstrap_aurc_summary(&s, config).map(Some),
            _ => Ok(None),
        };
    }
    let values: Vec<f64> = records.iter().filter_map(|r| metric.value(r)).collect();
    if values.len() < 2 {
        return Ok(None);
    }
    bootstrap_mean(&values, config).map(Some)
}

fn delta(
    metric: Metric,
    split: Split,
    sign: Direction,
    cv: &[&MetricRecord],
    de: &[&MetricRecord],
    config: &BootstrapConfig,
) -> Result<Option<BootstrapResult>> {
    if metric == Metric::Aurc {
        let (Some(a), Some(b)) = (scores(cv), scores(de)) else {
            return Ok(None);
        };
        if a.len() < 2 {
            return Ok(None);
        }
        return match split {
            Split::Ood => ood_delta_aurc(&a, &b, sign, config).map(Some),
            _ => bootstrap_aurc(&a, &b, config).map(Some),
        };
    }
    let mut ids = Vec::new();
    let (mut va, mut vb) = (Vec::new(), Vec::new());
    for (a, b) in cv.iter().zip(de) {
        if a.case_id != b.case_id {
            return Err(Error::MisalignedCases(format!(
                "`{}` paired with `{}`",
                a.case_id, b.case_id
            )));
        }
        if let (Some(x), Some(y)) = (metric.value(a), metric.value(b)) {
            ids.push(a.case_id.clone());
            va.push(x);
            vb.push(y);
        }
    }
    if ids.len() < 2 {
        return Ok(None);
    }
    let sample = PairedSample::new(ids, va, vb)?;
    match split {
        Split::Ood => ood_delta(&sample, sign, config).map(Some),
        _ => paired_bootstrap(&sample, config).map(Some),
    }
}

fn push_curves(curves: &mut Vec<CurveRecord>, split: Split, data: &SplitData<'_>) -> Result<()> {
    for (kind, records) in [(EnsembleKind::Cv, &data.cv), (EnsembleKind::De, &data.de)] {
        if let Some(s) = records.as_ref().and_then(|r| scores(r)) {
            let curve = risk_coverage_curve(&s)?;
            curves.push(CurveRecord {
                kind,
                split,
                order: curve.order().to_vec(),
                points: curve.points().to_vec(),
            });
        }
    }
    Ok(())
}

/// Builds the comparison from per-case records of one or both ensembles.
pub fn build_report<'a>(input: &ReportInput<'a>) -> Result<ComparisonReport> {
    let n = input.groups.len();
    for k in [&input.cv, &input.de].into_iter().flatten() {
        if k.records.len() != n || k.ncc_degenerate.len() != n {
            return Err(Error::MisalignedCases(format!(
                "{} records for {n} cases",
                k.records.len()
            )));
        }
    }
    if input.cv.is_none() && input.de.is_none() {
        return Err(Error::InvalidArgument("report needs at least one ensemble".into()));
    }
    let mut notes = Vec::new();
    let split_data = |split: Split| SplitData {
        cv: input.cv.as_ref().map(|k| {
            k.records.iter().filter(|r| r.ood == (split == Split::Ood)).collect()
        }),
        de: input.de.as_ref().map(|k| {
            k.records.iter().filter(|r| r.ood == (split == Split::Ood)).collect()
        }),
    };

    let mut metrics = Vec::new();
    let mut curves = Vec::new();
    for split in [Split::Id, Split::Ood] {
        let data = split_data(split);
        let count = data.cv.as_ref().or(data.de.as_ref()).map_or(0, Vec::len);
        if count == 0 {
            continue;
        }
        if count < 2 {
            notes.push(format!(
                "{} split has {count} case; at least 2 are needed for intervals",
                split.label()
            ));
            continue;
        }
        for metric in Metric::ALL {
            let config = input.bootstrap.with_seed(row_seed(input.bootstrap.seed, metric, split));
            let sum = |r: &Option<Vec<&MetricRecord>>| -> Result<Option<Summary>> {
                match r {
                    Some(r) => summary(metric, r, &config),
                    None => Ok(None),
                }
            };
            let (cv, de) = (sum(&data.cv)?, sum(&data.de)?);
            let sign = input.directions.get(metric);
            let d = match (&data.cv, &data.de) {
                (Some(a), Some(b)) => delta(metric, split, sign, a, b, &config)?,
                _ => None,
            };
            if cv.is_none() && de.is_none() {
                notes.push(format!(
                    "{} on the {} split has too few defined cases",
                    metric.name(),
                    split.label()
                ));
                continue;
            }
            metrics.push(MetricRow {
                metric: metric.name().to_owned(),
                task: metric.task().to_owned(),
                direction: metric.direction(),
                split,
                cv,
                de,
                delta: d,
                sign: (split == Split::Ood && d.is_some()).then(|| sign.sign()),
            });
        }
        push_curves(&mut curves, split, &data)?;
    }
    if input.include_ood && curves.iter().any(|c| c.split == Split::Ood) {
        let all = |k: &Option<KindRecords<'a>>| k.as_ref().map(|k| k.records.iter().collect());
        push_curves(&mut curves, Split::All, &SplitData { cv: all(&input.cv), de: all(&input.de) })?;
    }

    let mut cases = Vec::new();
    for k in [&input.cv, &input.de].into_iter().flatten() {
        for (i, r) in k.records.iter().enumerate() {
            if k.ncc_degenerate[i] {
                notes.push(format!(
                    "{}: NCC undefined for `{}` (constant map), reported as 0",
                    k.kind.display(),
                    r.case_id
                ));
            }
            cases.push(CaseRow {
                kind: k.kind,
                group: input.groups[i].clone(),
                record: r.clone(),
                ncc_degenerate: k.ncc_degenerate[i],
            });
        }
    }
    Ok(ComparisonReport {
        schema: REPORT_SCHEMA.to_owned(),
        dataset: input.dataset.to_owned(),
        source: input.source.map(str::to_owned),
        settings: input.settings.clone(),
        metrics,
        cases,
        curves,
        notes,
    })
}
