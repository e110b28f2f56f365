use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{Direction, Summary, Tier};

use super::report::{ComparisonReport, Metric, MetricRow, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

/// `x * 100` rounded to one decimal, ties to even, without a negative zero.
pub fn scaled(x: f64) -> String {
    let s = format!("{:.1}", x * 100.0);
    if s == "-0.0" {
        "0.0".to_owned()
    } else {
        s
    }
}

/// [`scaled`] with an explicit `+` on non-negative values.
pub fn scaled_signed(x: f64) -> String {
    let s = scaled(x);
    if s.starts_with('-') {
        s
    } else {
        format!("+{s}")
    }
}

fn arrow(direction: Direction) -> &'static str {
    match direction {
        Direction::Higher => "↑",
        Direction::Lower => "↓",
    }
}

/// Which ID row wins on a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Better {
    Cv,
    De,
    Tie,
}

/// Compares displayed values; equal strings are a tie.
pub fn better_method(direction: Direction, cv: &Summary, de: &Summary) -> Better {
    if scaled(cv.mean) == scaled(de.mean) {
        return Better::Tie;
    }
    let de_higher = de.mean > cv.mean;
    match (direction, de_higher) {
        (Direction::Higher, true) | (Direction::Lower, false) => Better::De,
        _ => Better::Cv,
    }
}

/// One line of the rendered table, values already scaled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub dataset: String,
    pub task: String,
    pub metric: String,
    pub direction: String,
    pub setting: String,
    pub value: String,
    pub ci_low: String,
    pub ci_high: String,
    pub sig: String,
    /// `yes` on the better ID row, `tie` on both when equal.
    pub better: String,
}

fn find(report: &ComparisonReport, metric: Metric, split: Split) -> Option<&MetricRow> {
    report
        .metrics
        .iter()
        .find(|r| r.metric == metric.name() && r.split == split)
}

/// Checks metric names and interval ordering.
pub fn validate_report(report: &ComparisonReport) -> Result<()> {
    for row in &report.metrics {
        Metric::parse(&row.metric)?;
        let summaries = [row.cv, row.de].into_iter().flatten();
        let intervals = summaries
            .map(|s| (s.ci_low, s.ci_high))
            .chain(row.delta.map(|d| (d.ci_low, d.ci_high)));
        for (lo, hi) in intervals {
            if lo > hi {
                return Err(Error::Schema(format!(
                    "{} ({}) has ci_low {lo} > ci_high {hi}",
                    row.metric,
                    row.split.label()
                )));
            }
        }
        if let Some(d) = row.delta {
            if Tier::from_p(d.p_value) != d.tier {
                return Err(Error::Schema(format!(
                    "{} ({}) tier disagrees with p = {}",
                    row.metric,
                    row.split.label(),
                    d.p_value
                )));
            }
        }
    }
    Ok(())
}

/// Table rows of one report: per metric the CV and DE rows of the ID split
/// and the OOD delta row.
pub fn table_rows(report: &ComparisonReport) -> Result<Vec<TableRow>> {
    validate_report(report)?;
    let mut rows = Vec::new();
    for metric in Metric::ALL {
        let base = |setting: &str| TableRow {
            dataset: report.dataset.clone(),
            task: metric.task().to_owned(),
            metric: metric.name().to_owned(),
            direction: arrow(metric.direction()).to_owned(),
            setting: setting.to_owned(),
            value: String::new(),
            ci_low: String::new(),
            ci_high: String::new(),
            sig: String::new(),
            better: String::new(),
        };
        if let Some(id) = find(report, metric, Split::Id) {
            let better = match (&id.cv, &id.de) {
                (Some(cv), Some(de)) => Some(better_method(metric.direction(), cv, de)),
                _ => None,
            };
            let marker = id.delta.map_or("", |d| d.tier.marker());
            for (setting, summary, me) in [("CV", &id.cv, Better::Cv), ("DE", &id.de, Better::De)] {
                let Some(s) = summary else { continue };
                let mut row = base(setting);
                row.value = scaled(s.mean);
                row.ci_low = scaled(s.ci_low);
                row.ci_high = scaled(s.ci_high);
                match better {
                    Some(Better::Tie) => row.better = "tie".to_owned(),
                    Some(b) if b == me => {
                        row.better = "yes".to_owned();
                        row.sig = marker.to_owned();
                    }
                    _ => {}
                }
                rows.push(row);
            }
        }
        if let Some(d) = find(report, metric, Split::Ood).and_then(|r| r.delta) {
            let mut row = base("OOD Δ");
            row.value = scaled_signed(d.mean_delta);
            row.ci_low = scaled(d.ci_low);
            row.ci_high = scaled(d.ci_high);
            row.sig = d.tier.marker().to_owned();
            rows.push(row);
        }
    }
    Ok(rows)
}

fn csv_table(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::InvalidArgument(format!("csv encoding: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv encoding: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn markdown_cell(row: &TableRow) -> String {
    let value = match row.better.as_str() {
        "yes" => format!("**{}**{}", row.value, row.sig),
        "tie" => format!("**{}**{} (tie)", row.value, row.sig),
        _ => format!("{}{}", row.value, row.sig),
    };
    format!("{value} ({}, {})", row.ci_low, row.ci_high)
}

/// Markdown with one column per report, Table-style.
fn markdown_table(reports: &[ComparisonReport], per_report: &[Vec<TableRow>]) -> String {
    let mut out = String::from("| Task | Metric | Setting |");
    for r in reports {
        let _ = write!(out, " {} |", r.dataset);
    }
    out.push_str("\n|---|---|---|");
    out.push_str(&"---|".repeat(reports.len()));
    out.push('\n');

    let mut keys: Vec<(String, String, String, String)> = Vec::new();
    for rows in per_report {
        for row in rows {
            let key = (row.task.clone(), row.metric.clone(), row.direction.clone(), row.setting.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    for metric in Metric::ALL {
        for (task, name, dir, setting) in keys.iter().filter(|k| k.1 == metric.name()) {
            let _ = write!(out, "| {task} | {name} {dir} | {setting} |");
            for rows in per_report {
                let cell = rows
                    .iter()
                    .find(|r| &r.metric == name && &r.setting == setting)
                    .map(markdown_cell)
                    .unwrap_or_default();
                let _ = write!(out, " {cell} |");
            }
            out.push('\n');
        }
    }
    out
}

/// Renders one or more reports. CSV stacks their rows; Markdown puts each
/// dataset in its own column.
pub fn render_tables(reports: &[ComparisonReport], format: TableFormat) -> Result<String> {
    let per_report = reports.iter().map(table_rows).collect::<Result<Vec<_>>>()?;
    match format {
        TableFormat::Csv => csv_table(&per_report.concat()),
        TableFormat::Markdown => Ok(markdown_table(reports, &per_report)),
    }
}

pub fn load_report(path: &Path) -> Result<ComparisonReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Reads report files and renders them.
pub fn cmd_report(paths: &[&Path], format: TableFormat) -> Result<String> {
    let reports = paths.iter().map(|p| load_report(p)).collect::<Result<Vec<_>>>()?;
    render_tables(&reports, format)
}
