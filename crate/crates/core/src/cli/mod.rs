//! Command-line front end: manifests, batch evaluation and report tables.
//!
//! Output tables show values multiplied by 100 with one decimal (ties to
//! even); `report.json` keeps full precision.

mod evaluate;
mod manifest;
mod render;
mod report;
mod simulate;

pub use evaluate::{
    cmd_evaluate, evaluate_manifest, evaluate_to_report, render_outputs, report_settings,
    write_outputs, EvaluateOptions, Evaluations,
};
pub use manifest::{
    parse_manifest, parse_manifest_str, Consensus, LoadedCase, Manifest, ManifestCase,
    ManifestFile, ManifestFileCase, MemberPaths, MANIFEST_SCHEMA,
};
pub use render::{
    better_method, cmd_report, load_report, render_tables, scaled, scaled_signed, table_rows,
    validate_report, Better, TableFormat, TableRow,
};
pub use report::{
    build_report, CaseRow, ComparisonReport, CurveRecord, KindRecords, Metric, MetricRow,
    OodDirections, ReportInput, ReportSettings, Split, REPORT_SCHEMA,
};
pub use simulate::{cmd_simulate, read_items, split_plan, SimulationConfig, SplitPlanFile};
