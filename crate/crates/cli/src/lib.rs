//! The `flarecast` command line: preprocessing, dataset preparation,
//! training, evaluation and the loss comparison protocol.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or
//! training failure. Errors go to stderr as one `error[<kind>]: ...` line.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod data;
mod error;
mod io;
mod model;
mod pipeline;

pub use error::{CliError, CliResult, Kind};

#[derive(Debug, Parser)]
#[command(
    name = "flarecast",
    version,
    about = "Flare forecasting pipeline with an ordinality-aware loss"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Crop, filter, clamp and tile magnetogram patches into 512x512 images.
    Preprocess(PreprocessArgs),
    /// Write the five augmented variants of selected samples.
    Augment(AugmentArgs),
    /// Assign flare classes and labels from a flare catalog.
    Label(LabelArgs),
    /// Assign each sample the tri-monthly partition of its AR onset.
    Split(SplitArgs),
    /// Thin NF samples of the training partitions.
    Undersample(UndersampleArgs),
    /// Train a scorer on the training partitions, calibrating on validation.
    Train(TrainArgs),
    /// Write per-sample probabilities from a trained model.
    Score(ScoreArgs),
    /// Per-zone skill scores at a fixed threshold.
    Evaluate(EvaluateArgs),
    /// Best threshold on the 0.01..0.99 grid by composite skill score.
    Sweep(SweepArgs),
    /// BCE vs. BCE-SF over several seeds on synthetic ordinal data.
    Compare(CompareArgs),
    /// Class, label and partition counts of a manifest.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// Directory of `<stem>.mgr` rasters with matching `<stem>.msk` masks.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Output directory for `<stem>.pgm`, `<stem>.mgr` and `preprocess_log.csv`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Manifest to update in place: raster paths are pointed at the processed
    /// rasters and samples whose patch was dropped are removed.
    #[arg(long, value_name = "CSV")]
    manifest: Option<PathBuf>,
    /// Minimum crop width in pixels.
    #[arg(long, default_value_t = flarecast_core::preprocess::DEFAULT_MIN_WIDTH)]
    min_width: usize,
    /// Flux cap in Gauss.
    #[arg(long, default_value_t = flarecast_core::preprocess::DEFAULT_CAP)]
    cap: f64,
    /// Values with magnitude at or below this many Gauss are zeroed.
    #[arg(long, default_value_t = flarecast_core::preprocess::DEFAULT_NOISE_FLOOR)]
    noise_floor: f64,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OnlyClass {
    /// M and X samples.
    #[value(name = "FL")]
    Fl,
    /// Every sample.
    #[value(name = "all")]
    All,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// Manifest to extend in place with the augmented samples.
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    /// Output directory for the augmented `.mgr` and `.pgm` files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Global seed for the random-noise variant.
    #[arg(long)]
    seed: u64,
    /// Which samples to augment. Samples outside the training partitions are
    /// never augmented.
    #[arg(long, value_enum, default_value = "FL")]
    only_class: OnlyClass,
    /// Flux cap in Gauss applied after augmentation.
    #[arg(long, default_value_t = flarecast_core::preprocess::DEFAULT_CAP)]
    cap: f64,
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// Flare catalog CSV with columns ar_id, start_time, peak_flux (W/m^2).
    #[arg(long, value_name = "CSV")]
    catalog: PathBuf,
    /// Manifest to label in place.
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Manifest to partition in place.
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
}

#[derive(Debug, Args)]
struct UndersampleArgs {
    /// Labeled, partitioned manifest.
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    /// Seed for the keep/drop draws.
    #[arg(long)]
    seed: u64,
    /// Keep rate for FQ samples, in (0, 1].
    #[arg(long, default_value_t = 0.08)]
    fq: f64,
    /// Keep rate for A, B and C samples, in (0, 1].
    #[arg(long, default_value_t = 0.30)]
    abc: f64,
    /// Output manifest (default: overwrite the input).
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// `key = value` training configuration.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Labeled, partitioned manifest whose raster paths point to processed
    /// `.pgm` images or `.mgr` rasters.
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Optional per-epoch history CSV.
    #[arg(long, value_name = "CSV")]
    history: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum RoleFilter {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Model file written by `train`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Manifest of samples to score.
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    /// Output CSV with columns sample_id, score.
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
    /// Restrict to samples of one role (needs partitions).
    #[arg(long, value_enum, default_value = "all")]
    role: RoleFilter,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Labeled manifest supplying labels and longitudes.
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    /// CSV with columns sample_id, score (probability of FL).
    #[arg(long, value_name = "CSV")]
    scores: PathBuf,
    /// Decision threshold in (0, 1); a sample is FL when score >= threshold.
    #[arg(long)]
    threshold: f64,
    /// Longitude zones in degrees: `30,60,90` (cumulative |lon| <= bound) or
    /// `annular:0-30,30-60,60-90`.
    #[arg(long, default_value = "30,60,90")]
    zones: String,
    /// Output report CSV.
    #[arg(long, value_name = "CSV")]
    report: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// CSV with columns sample_id, score.
    #[arg(long, value_name = "CSV")]
    scores: PathBuf,
    /// CSV with columns sample_id, label (FL/NF or 1/0); a manifest works.
    #[arg(long, value_name = "CSV")]
    labels: PathBuf,
    /// Optional CSV of the full 99-threshold table.
    #[arg(long, value_name = "CSV")]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Number of seeds (at least 5).
    #[arg(long)]
    seeds: usize,
    /// First seed; the run uses seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Configuration for the BCE run.
    #[arg(long, value_name = "FILE")]
    config_bce: PathBuf,
    /// Configuration for the BCE-SF run.
    #[arg(long, value_name = "FILE")]
    config_bcesf: PathBuf,
    /// Output CSV with one row per seed, loss and zone.
    #[arg(long, value_name = "CSV")]
    report: PathBuf,
    /// Longitude zones in degrees, as for `evaluate`.
    #[arg(long, default_value = "annular:0-30,30-60,60-90")]
    zones: String,
    /// Feature noise of the synthetic generator.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Manifest to summarize.
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Preprocess(a) => pipeline::preprocess(&a),
        Command::Augment(a) => pipeline::augment(&a),
        Command::Label(a) => data::label(&a),
        Command::Split(a) => data::split(&a),
        Command::Undersample(a) => data::undersample(&a),
        Command::Report(a) => data::report(&a),
        Command::Train(a) => model::train(&a),
        Command::Score(a) => model::score(&a),
        Command::Evaluate(a) => model::evaluate(&a),
        Command::Sweep(a) => model::sweep(&a),
        Command::Compare(a) => model::compare(&a),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    let text = e.to_string();
                    let first = text.lines().next().unwrap_or("invalid arguments");
                    let first = first.strip_prefix("error: ").unwrap_or(first);
                    eprintln!("{}", CliError::usage(first));
                    Kind::Usage.exit_code()
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.kind.exit_code()
        }
    }
}
