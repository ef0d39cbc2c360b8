mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use cellbench::metrics::Metric;
use cellbench::trackers::{OverlapCost, TrackerMethod};
use cellbench::transform::{CellLimit, Truncation};
use clap::{Args, Parser, Subcommand};

/// Experiment-aware benchmarking of cell tracking.
#[derive(Debug, Parser)]
#[command(name = "cellbench", version)]
struct Cli {
    /// JSON run configuration (sections: colony, experiment, tracker, weights,
    /// sweep, layout, smoothing); command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a rod-cell colony and write it as a dataset
    Gen(GenArgs),
    /// Subsample and truncate a dataset
    Transform(TransformArgs),
    /// Track a dataset's segmentation and write the prediction
    Track(TrackArgs),
    /// Score a prediction against ground truth
    Evaluate(EvaluateArgs),
    /// Evaluate a tracker over a grid of imaging intervals and colony sizes
    Sweep(SweepArgs),
    /// Division, disappearance and displacement statistics per imaging interval
    Stats(StatsArgs),
    /// Robustness table from sweep grids
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Output dataset directory
    #[arg(short, long, value_name = "DIR")]
    out: PathBuf,
    /// Random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Number of frames [default: 40]
    #[arg(long)]
    frames: Option<u32>,
    /// Chamber width in pixels [default: 256]
    #[arg(long)]
    width: Option<u32>,
    /// Chamber height in pixels [default: 96]
    #[arg(long)]
    height: Option<u32>,
    /// Cells in the first frame [default: 4]
    #[arg(long)]
    initial_cells: Option<u32>,
    /// Mean frames between divisions, or "inf" for none [default: 8]
    #[arg(long, value_parser = parse_division_time)]
    division_time: Option<DivisionTime>,
    /// Half-width of the uniform division-time jitter [default: 1.5]
    #[arg(long)]
    division_jitter: Option<f64>,
    /// Rod length at birth in pixels [default: 16]
    #[arg(long)]
    rod_length: Option<f64>,
    /// Rod width in pixels [default: 6]
    #[arg(long)]
    rod_width: Option<f64>,
    /// Angle between daughters after division, degrees [default: 30]
    #[arg(long)]
    snap_angle: Option<f64>,
    /// Length gained per frame in pixels [default: 2]
    #[arg(long)]
    growth_rate: Option<f64>,
    /// Keep cells that cross the left/right chamber border
    #[arg(long)]
    no_exit: bool,
}

#[derive(Debug, Clone, Copy)]
struct DivisionTime(Option<f64>);

fn parse_division_time(s: &str) -> Result<DivisionTime, String> {
    match s {
        "inf" | "none" => Ok(DivisionTime(None)),
        n => n
            .parse()
            .map(|v| DivisionTime(Some(v)))
            .map_err(|e| format!("{e}")),
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Input dataset directory
    #[arg(short, long, env = "TOIAM_DATA_DIR", value_name = "DIR")]
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConditionArgs {
    /// First retained frame, below k [default: 0]
    #[arg(long)]
    offset: Option<u32>,
    /// Truncation rule: prefix or last-compliant [default: prefix]
    #[arg(long)]
    truncation: Option<Truncation>,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output dataset directory
    #[arg(short, long, value_name = "DIR")]
    out: PathBuf,
    /// Subsampling factor [default: 1]
    #[arg(long)]
    k: Option<u32>,
    /// Cell-count limit, or "inf" [default: inf]
    #[arg(long)]
    n_max: Option<CellLimit>,
    #[command(flatten)]
    condition: ConditionArgs,
}

#[derive(Debug, Args)]
struct TrackerArgs {
    /// Tracker: distance, lap, oracle or empty [default: lap]
    #[arg(long)]
    tracker: Option<TrackerMethod>,
    /// JSON tracker configuration
    #[arg(long, value_name = "FILE")]
    tracker_config: Option<PathBuf>,
    /// Distance gate in pixels at the native interval [default: 60]
    #[arg(long)]
    gate: Option<f64>,
    /// Do not scale the gate with the subsampling factor
    #[arg(long)]
    fixed_gate: bool,
    /// LAP birth cost [default: 1]
    #[arg(long)]
    birth_cost: Option<f64>,
    /// LAP death cost [default: 1]
    #[arg(long)]
    death_cost: Option<f64>,
    /// Children a cell may be linked to [default: 2]
    #[arg(long)]
    max_children: Option<usize>,
    /// LAP overlap cost: iou or intersection-over-target [default: iou]
    #[arg(long, value_parser = parse_overlap)]
    overlap: Option<OverlapCost>,
}

fn parse_overlap(s: &str) -> Result<OverlapCost, String> {
    match s {
        "iou" => Ok(OverlapCost::Iou),
        "intersection-over-target" => Ok(OverlapCost::IntersectionOverTarget),
        o => Err(format!(
            "unknown overlap cost {o:?} (iou, intersection-over-target)"
        )),
    }
}

#[derive(Debug, Args)]
struct TrackArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output directory for the predicted dataset
    #[arg(short, long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    tracker: TrackerArgs,
    /// Subsampling factor the input was produced with [default: 1]
    #[arg(long)]
    k: Option<u32>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Ground-truth dataset directory
    #[arg(long, env = "TOIAM_DATA_DIR", value_name = "DIR")]
    gt: Option<PathBuf>,
    /// Predicted dataset directory
    #[arg(long, value_name = "DIR")]
    pred: PathBuf,
    /// Comma-separated metrics [default: tra,lnk,div,ct]
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<Metric>>,
    /// JSON AOGM weights (ns, fn, fp, ea, ed, ec) [default: 5,10,1,1.5,1,1]
    #[arg(long, value_name = "FILE")]
    weights: Option<PathBuf>,
    /// Output JSON file [default: standard output]
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output directory (grid.csv, grid.json, contour.json, rm.csv)
    #[arg(short, long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    tracker: TrackerArgs,
    /// Comma-separated subsampling factors [default: 1,2,3,5,10,15,20,30,40]
    #[arg(long, value_delimiter = ',')]
    sf: Option<Vec<u32>>,
    /// Comma-separated cell-count limits, "inf" allowed [default: 100,400,700,1000,1300,1600]
    #[arg(long, value_delimiter = ',')]
    mc: Option<Vec<CellLimit>>,
    /// Comma-separated metrics [default: tra,lnk,div]
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<Metric>>,
    /// Comma-separated robustness thresholds [default: 0.8]
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// JSON AOGM weights [default: 5,10,1,1.5,1,1]
    #[arg(long, value_name = "FILE")]
    weights: Option<PathBuf>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    condition: ConditionArgs,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated subsampling factors [default: 1,2,3,5,10,15,20,30,40]
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<u32>>,
    /// Weight of the newest value in the smoothed series [default: 0.1]
    #[arg(long)]
    smoothing: Option<f64>,
    /// Output JSON file [default: standard output]
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// grid.json files written by sweep
    #[arg(required = true, value_name = "GRID")]
    grids: Vec<PathBuf>,
    /// Comma-separated thresholds [default: those recorded in each grid]
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Output CSV file [default: standard output]
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Exit status 1 for bad input or configuration, 2 for failures while running.
#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Failure::Invalid(anyhow::anyhow!(msg.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
