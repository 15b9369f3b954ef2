//! `funnynet` command-line tool.

mod commands;
mod par;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use funnynet::config::RunConfig;
use funnynet::synth::PlantedSignal;
use funnynet::ErrorClass;

#[derive(Debug, Parser)]
#[command(name = "funnynet", version, about = "Laughter detection and multimodal funny-moment classification")]
pub struct Cli {
    /// TOML run configuration; unset keys take the defaults listed below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-file stages.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorpusKind {
    Laughter,
    Funny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Signal {
    AudioText,
    AudioOnly,
}

impl From<Signal> for PlantedSignal {
    fn from(s: Signal) -> Self {
        match s {
            Signal::AudioText => PlantedSignal::AudioText,
            Signal::AudioOnly => PlantedSignal::AudioOnly,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect laughter in stereo or 5.1 WAV files, clustering all inputs jointly.
    DetectLaughter {
        #[arg(required = true, num_args = 1..)]
        wavs: Vec<PathBuf>,
        /// Number of clusters [default: cluster.k]
        #[arg(long)]
        k: Option<usize>,
        /// Seed [default: cluster.seed]
        #[arg(long)]
        seed: Option<u64>,
        /// JSON list with one annotation per input [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write `<media_id>.json` per input into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Cut funny / not-funny clips from a media manifest and encode their features.
    BuildDataset {
        manifest: PathBuf,
        /// Laughter annotations (a JSON list or a single annotation).
        #[arg(long, required = true)]
        ann: PathBuf,
        /// Clip length in seconds [default: dataset.n_s]
        #[arg(long)]
        n_sec: Option<f64>,
        /// Negatives per positive [default: dataset.neg_ratio]
        #[arg(long)]
        neg_ratio: Option<f64>,
        /// Seed [default: seed]
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, required = true)]
        out: PathBuf,
    },
    /// Write a deterministic synthetic corpus with ground truth.
    SynthCorpus {
        #[arg(long, value_enum, default_value_t = CorpusKind::Laughter)]
        kind: CorpusKind,
        /// Soundtracks (laughter kind).
        #[arg(long, default_value_t = 10)]
        files: usize,
        /// Soundtrack length in seconds (laughter kind).
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        /// Training clips (funny kind).
        #[arg(long, default_value_t = 2000)]
        train: usize,
        /// Test clips (funny kind).
        #[arg(long, default_value_t = 500)]
        test: usize,
        /// Modalities carrying the label (funny kind).
        #[arg(long, value_enum, default_value_t = Signal::AudioText)]
        signal: Signal,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, required = true)]
        out: PathBuf,
    },
    /// Train a model on a dataset directory.
    Train {
        dataset: PathBuf,
        /// Checkpoint path; the index goes to `<out>.index.json`.
        #[arg(long, required = true)]
        out: PathBuf,
        /// Per-epoch CSV log [default: <out>.log.csv]
        #[arg(long)]
        log: Option<PathBuf>,
        /// Seed [default: train.seed]
        #[arg(long)]
        seed: Option<u64>,
        /// Epoch cap [default: train.epochs]
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Classification metrics of a checkpoint on a dataset directory.
    Evaluate {
        dataset: PathBuf,
        #[arg(long, required = true)]
        checkpoint: PathBuf,
        /// Report JSON [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Temporal and detection metrics of predicted laughter against references.
    EvalLaughter {
        pred: PathBuf,
        gt: PathBuf,
        /// Report JSON; the table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Funny-probability timeline of one media file.
    Predict {
        wav: PathBuf,
        #[arg(long, required = true)]
        checkpoint: PathBuf,
        /// Frame stack as an FNWM matrix, one row per frame.
        #[arg(long, requires_all = ["frame_height", "frame_width"])]
        frames: Option<PathBuf>,
        #[arg(long)]
        frame_height: Option<usize>,
        #[arg(long)]
        frame_width: Option<usize>,
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Window stride in seconds [default: eval.stride_s]
        #[arg(long)]
        stride: Option<f64>,
        /// CSV [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detector F1 as a function of the cluster count.
    SweepClusters {
        #[arg(required = true, num_args = 1..)]
        wavs: Vec<PathBuf>,
        /// Reference annotations.
        #[arg(long, required = true)]
        gt: PathBuf,
        /// Inclusive range `lo..hi`.
        #[arg(long, default_value = "1..12")]
        k_range: String,
        /// CSV [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Attention maps and modality contributions for dataset clips.
    ExportAttention {
        dataset: PathBuf,
        #[arg(long, required = true)]
        checkpoint: PathBuf,
        /// Clip ids to export [default: all]
        #[arg(long = "clip", action = ArgAction::Append)]
        clips: Vec<String>,
        /// Contribution measure [default: eval.contribution]
        #[arg(long)]
        measure: Option<String>,
        #[arg(long, required = true)]
        out: PathBuf,
    },
}

fn command() -> clap::Command {
    let help = format!(
        "Configuration defaults (override with --config FILE):\n\n{}",
        RunConfig::default_toml()
    );
    let mut cmd = Cli::command().after_long_help(help.clone());
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        let h = help.clone();
        cmd = cmd.mut_subcommand(name, move |s| s.after_long_help(h));
    }
    cmd
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numeric => 4,
            })
        }
    }
}
