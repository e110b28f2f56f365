use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use uqseg::case::{EvalOptions, MaskMode};
use uqseg::cli::{
    cmd_evaluate, cmd_report, cmd_simulate, read_items, split_plan, EvaluateOptions,
    OodDirections, SimulationConfig, TableFormat,
};
use uqseg::metrics::{Binning, BinningScheme, SegDistance};
use uqseg::stats::{BootstrapConfig, DEFAULT_RESAMPLES};
use uqseg::{Error, Result};

#[derive(Parser)]
#[command(name = "uqseg", version, about = "Evaluate uncertainty of segmentation ensembles")]
struct Cli {
    /// Base seed for bootstrap resampling and simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Calibration bins.
    #[arg(long, global = true, default_value_t = 10)]
    bins: usize,
    /// Chebyshev radius of the BA-ECE boundary band, in voxels.
    #[arg(long, global = true, default_value_t = 2)]
    band_radius: usize,
    /// JSON object mapping metric names to the +1/-1 sign used for OOD deltas.
    #[arg(long, global = true)]
    ood_direction_file: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mask {
    All,
    Foreground,
}

impl From<Mask> for MaskMode {
    fn from(m: Mask) -> Self {
        match m {
            Mask::All => MaskMode::All,
            Mask::Foreground => MaskMode::Foreground,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    EqualWidth,
    EqualMass,
}

#[derive(Clone, Copy, ValueEnum)]
enum Distance {
    Iou,
    Dice,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

#[derive(Subcommand)]
enum Command {
    /// Score a manifest and write report.json, table.csv, percase.csv and referral.csv.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long, value_enum, default_value = "all")]
        calibration_mask: Mask,
        #[arg(long, value_enum, default_value = "all")]
        ncc_mask: Mask,
        #[arg(long, value_enum, default_value = "equal-width")]
        binning: Scheme,
        #[arg(long, value_enum, default_value = "iou")]
        ged_distance: Distance,
        /// Also write referral curves over ID and OOD cases pooled.
        #[arg(long)]
        include_ood: bool,
    },
    /// Generate a phantom dataset with surrogate CV and DE predictions.
    Simulate {
        /// Simulation config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build image-grouped folds from an item_id,image_id,rater_id CSV.
    SplitPlan {
        #[arg(long)]
        items: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Also plan a deep ensemble with this many members.
        #[arg(long)]
        members: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one or more report.json files as a table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
    }
    match cli.command {
        Command::Evaluate {
            manifest,
            out,
            resamples,
            calibration_mask,
            ncc_mask,
            binning,
            ged_distance,
            include_ood,
        } => {
            let directions = match &cli.ood_direction_file {
                Some(p) => OodDirections::from_json(&fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?)?,
                None => OodDirections::default(),
            };
            let scheme = match binning {
                Scheme::EqualWidth => BinningScheme::EqualWidth,
                Scheme::EqualMass => BinningScheme::EqualMass,
            };
            let mut bootstrap = BootstrapConfig::new(resamples, cli.seed.unwrap_or(0));
            if let Some(n) = cli.threads {
                bootstrap = bootstrap.with_threads(n);
            }
            let options = EvaluateOptions {
                eval: EvalOptions {
                    binning: Binning::new(cli.bins, scheme)?,
                    band_radius: cli.band_radius,
                    calibration_mask: calibration_mask.into(),
                    ncc_mask: ncc_mask.into(),
                    ged_distance: match ged_distance {
                        Distance::Iou => SegDistance::Iou,
                        Distance::Dice => SegDistance::Dice,
                    },
                },
                bootstrap,
                directions,
                include_ood,
            };
            let report = cmd_evaluate(&manifest, &out, &options)?;
            for note in &report.notes {
                log::warn!("{note}");
            }
            Ok(())
        }
        Command::Simulate { config, out } => {
            let mut config: SimulationConfig = match config {
                Some(p) => read_json(&p)?,
                None => SimulationConfig::default(),
            };
            if let Some(seed) = cli.seed {
                config.phantom.seed = seed;
                config.experiment.seed = seed;
            }
            config.experiment.options.binning = Binning::new(cli.bins, BinningScheme::EqualWidth)?;
            config.experiment.options.band_radius = cli.band_radius;
            let path = cmd_simulate(&config, &out)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::SplitPlan {
            items,
            folds,
            members,
            out,
        } => {
            let items = read_items(&items)?;
            let plan = split_plan(&items, folds, members, cli.seed.unwrap_or(0))?;
            let mut text = serde_json::to_string_pretty(&plan)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            text.push('\n');
            emit(&text, out.as_deref())
        }
        Command::Report { reports, format } => {
            let paths: Vec<&Path> = reports.iter().map(PathBuf::as_path).collect();
            let format = match format {
                Format::Csv => TableFormat::Csv,
                Format::Markdown => TableFormat::Markdown,
            };
            emit(&cmd_report(&paths, format)?, None)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
