use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::case::{evaluate_case, CaseEvaluation, CaseInput, EvalOptions, MaskMode};
use crate::ensemble::EnsembleKind;
use crate::error::{Error, Result};
use crate::metrics::{BinningScheme, MetricRecord, SegDistance};
use crate::stats::BootstrapConfig;

use super::manifest::{parse_manifest, Manifest};
use super::render::{render_tables, TableFormat};
use super::report::{build_report, ComparisonReport, KindRecords, OodDirections, ReportInput, ReportSettings};

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    pub eval: EvalOptions,
    pub bootstrap: BootstrapConfig,
    pub directions: OodDirections,
    /// Add referral curves over all cases, OOD included.
    pub include_ood: bool,
}

/// Per-kind evaluations in manifest case order.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluations {
    pub cv: Option<Vec<CaseEvaluation>>,
    pub de: Option<Vec<CaseEvaluation>>,
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Loads and scores every case with every ensemble kind the manifest has.
pub fn evaluate_manifest(manifest: &Manifest, options: &EvaluateOptions) -> Result<Evaluations> {
    let kinds = manifest.kinds();
    let per_case = with_pool(options.bootstrap.threads, || {
        manifest
            .cases
            .par_iter()
            .map(|case| {
                let loaded = manifest.load_case(case)?;
                kinds
                    .iter()
                    .map(|&kind| {
                        evaluate_case(
                            &CaseInput {
                                case_id: &case.id,
                                ood: case.ood,
                                classes: manifest.classes,
                                members: loaded.members(kind),
                                raters: &loaded.raters,
                                consensus: &loaded.consensus,
                            },
                            &options.eval,
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let column = |k: usize| -> Vec<CaseEvaluation> { per_case.iter().map(|c| c[k].clone()).collect() };
    let index = |kind| kinds.iter().position(|&k| k == kind);
    Ok(Evaluations {
        cv: index(EnsembleKind::Cv).map(column),
        de: index(EnsembleKind::De).map(column),
    })
}

fn mask_name(m: MaskMode) -> &'static str {
    match m {
        MaskMode::All => "all",
        MaskMode::Foreground => "foreground",
    }
}

pub fn report_settings(options: &EvaluateOptions) -> ReportSettings {
    let eval = &options.eval;
    ReportSettings {
        resamples: options.bootstrap.resamples,
        seed: options.bootstrap.seed,
        bins: eval.binning.n_bins,
        binning: match eval.binning.scheme {
            BinningScheme::EqualWidth => "equal-width",
            BinningScheme::EqualMass => "equal-mass",
        }
        .to_owned(),
        band_radius: eval.band_radius,
        calibration_mask: mask_name(eval.calibration_mask).to_owned(),
        ncc_mask: mask_name(eval.ncc_mask).to_owned(),
        ged_distance: match eval.ged_distance {
            SegDistance::Iou => "iou",
            SegDistance::Dice => "dice",
        }
        .to_owned(),
        include_ood: options.include_ood,
    }
}

/// Scores a manifest and builds its report without touching the disk.
pub fn evaluate_to_report(manifest: &Manifest, options: &EvaluateOptions) -> Result<ComparisonReport> {
    let evals = evaluate_manifest(manifest, options)?;
    let groups: Vec<String> = manifest.cases.iter().map(|c| c.group.clone()).collect();
    let split = |e: &Option<Vec<CaseEvaluation>>| {
        e.as_ref().map(|v| {
            (
                v.iter().map(|c| c.record.clone()).collect::<Vec<_>>(),
                v.iter().map(|c| c.ncc_degenerate).collect::<Vec<_>>(),
            )
        })
    };
    let (cv, de) = (split(&evals.cv), split(&evals.de));
    fn kind(k: EnsembleKind, d: &Option<(Vec<MetricRecord>, Vec<bool>)>) -> Option<KindRecords<'_>> {
        d.as_ref().map(|(records, flags)| KindRecords {
            kind: k,
            records,
            ncc_degenerate: flags,
        })
    }
    build_report(&ReportInput {
        dataset: &manifest.dataset,
        source: manifest.source.as_deref(),
        groups: &groups,
        cv: kind(EnsembleKind::Cv, &cv),
        de: kind(EnsembleKind::De, &de),
        settings: report_settings(options),
        directions: &options.directions,
        bootstrap: options.bootstrap,
        include_ood: options.include_ood,
    })
}

#[derive(Serialize)]
struct PerCaseRow<'a> {
    case_id: &'a str,
    group: &'a str,
    ood: bool,
    kind: &'a str,
    dsc: f64,
    ace: f64,
    ba_ece: Option<f64>,
    ncc: f64,
    ged: f64,
    u: Option<f64>,
    r: f64,
}

#[derive(Serialize)]
struct ReferralRow<'a> {
    kind: &'a str,
    split: &'a str,
    rank: usize,
    case_id: &'a str,
    coverage: f64,
    risk: f64,
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::InvalidArgument(format!("csv encoding: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv encoding: {e}")))
}

/// The four output files of an evaluation, rendered in memory.
pub fn render_outputs(report: &ComparisonReport) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut json = serde_json::to_vec_pretty(report)
        .map_err(|e| Error::InvalidArgument(format!("report encoding: {e}")))?;
    json.push(b'\n');
    let table = render_tables(std::slice::from_ref(report), TableFormat::Csv)?;
    let percase = csv_bytes(report.cases.iter().map(|c| PerCaseRow {
        case_id: &c.record.case_id,
        group: &c.group,
        ood: c.record.ood,
        kind: c.kind.label(),
        dsc: c.record.dsc,
        ace: c.record.ace,
        ba_ece: c.record.ba_ece,
        ncc: c.record.ncc,
        ged: c.record.ged,
        u: c.record.u,
        r: c.record.r,
    }))?;
    let referral = csv_bytes(report.curves.iter().flat_map(|curve| {
        curve.points.iter().zip(&curve.order).enumerate().map(move |(i, (p, id))| ReferralRow {
            kind: curve.kind.label(),
            split: curve.split.label(),
            rank: i + 1,
            case_id: id,
            coverage: p.coverage,
            risk: p.risk,
        })
    }))?;
    Ok(vec![
        ("report.json", json),
        ("table.csv", table.into_bytes()),
        ("percase.csv", percase),
        ("referral.csv", referral),
    ])
}

/// Writes `files` into `dir`; if any write fails, removes what was written.
pub fn write_outputs(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(Error::io(&path, e));
        }
        written.push(path);
    }
    Ok(written)
}

/// Evaluates the manifest at `manifest_path` and writes `report.json`,
/// `table.csv`, `percase.csv` and `referral.csv` into `out_dir`. Nothing is
/// written unless the whole evaluation succeeds.
pub fn cmd_evaluate(manifest_path: &Path, out_dir: &Path, options: &EvaluateOptions) -> Result<ComparisonReport> {
    let manifest = parse_manifest(manifest_path)?;
    let report = evaluate_to_report(&manifest, options)?;
    write_outputs(out_dir, &render_outputs(&report)?)?;
    Ok(report)
}
