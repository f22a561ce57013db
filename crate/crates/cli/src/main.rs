//! `vid2trace`: extract replayable tap/type/swipe traces from screen-recording
//! frames, train the tap localizer, evaluate each phase, and match traces onto
//! new screenshots.
//!
//! Settings resolve as defaults, then the TOML file given by `--config`, then
//! `VID2TRACE_*` environment variables, then flags.

mod commands;
mod config;
mod decode;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Failure kind, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Segment,
    Classify,
    Localize,
    Output,
    Train,
    Match,
    Eval,
    Decode,
    Fixtures,
}

impl Stage {
    pub fn exit_code(self) -> u8 {
        match self {
            Self::Config => 3,
            Self::Load => 4,
            Self::Segment => 5,
            Self::Classify => 6,
            Self::Localize => 7,
            Self::Output => 8,
            Self::Train => 9,
            Self::Match => 10,
            Self::Eval => 11,
            Self::Decode => 12,
            Self::Fixtures => 13,
        }
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: anyhow::Error,
}

pub type CliResult<T = ()> = Result<T, StageError>;

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> CliResult<T> {
        self.map_err(|e| StageError { stage, error: e.into() })
    }
}

#[derive(Parser, Debug)]
#[command(name = "vid2trace", version, about = "Pixel-only interaction trace extraction from screen recordings")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML settings file.
    #[arg(long, global = true, env = "VID2TRACE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Run every parallel section on one thread.
    #[arg(long, global = true, env = "VID2TRACE_DETERMINISTIC")]
    pub deterministic: bool,
    #[arg(long, global = true, env = "VID2TRACE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct RecordingArgs {
    /// Directory with frames.json, numbered PNG frames and optional ocr/ sidecars.
    pub recording: PathBuf,
    /// Decode this video into RECORDING first, using the decoder hook.
    #[arg(long)]
    pub video: Option<PathBuf>,
    /// Shell command template with {input} and {output} placeholders.
    #[arg(long, env = "VID2TRACE_DECODER_HOOK")]
    pub decoder_hook: Option<String>,
    /// Frame rate written to the manifest of decoded videos.
    #[arg(long, default_value_t = 10.0)]
    pub fps: f64,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SegArgs {
    /// rgb, yuv, hist or hog.
    #[arg(long, env = "VID2TRACE_FEATURE")]
    pub feature: Option<String>,
    /// l1, l2 or ssim.
    #[arg(long, env = "VID2TRACE_METRIC")]
    pub metric: Option<String>,
    #[arg(long, env = "VID2TRACE_MIN_STABLE")]
    pub min_stable: Option<usize>,
    #[arg(long, env = "VID2TRACE_DIVISOR")]
    pub divisor: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ClassifyArgs {
    /// Co-moving texts needed for a swipe.
    #[arg(long, env = "VID2TRACE_MIN_COMOVING")]
    pub min_comoving: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// hm2d, hm3d, hm3d-noshortcut or hm3d+2d.
    #[arg(long, env = "VID2TRACE_VARIANT")]
    pub variant: Option<String>,
    /// Frames sampled per clip (8 or 16).
    #[arg(long, env = "VID2TRACE_K")]
    pub k: Option<usize>,
    /// Model grid as HEIGHTxWIDTH.
    #[arg(long, env = "VID2TRACE_DIMS")]
    pub dims: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, short, env = "VID2TRACE_OUTPUT")]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Detect stable intervals and keyframes.
    Segment {
        #[command(flatten)]
        input: RecordingArgs,
        #[command(flatten)]
        seg: SegArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Also write series.png with the similarity plot.
        #[arg(long)]
        plot: bool,
        /// Also write each keyframe as keyframes/<index>.png.
        #[arg(long)]
        keyframes: bool,
    },
    /// Segment, then label every clip.
    Classify {
        #[command(flatten)]
        input: RecordingArgs,
        #[command(flatten)]
        seg: SegArgs,
        #[command(flatten)]
        cls: ClassifyArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Segment, classify, then localize taps.
    Localize {
        #[command(flatten)]
        input: RecordingArgs,
        #[command(flatten)]
        seg: SegArgs,
        #[command(flatten)]
        cls: ClassifyArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, env = "VID2TRACE_CHECKPOINT")]
        checkpoint: Option<PathBuf>,
    },
    /// Run the whole pipeline and write trace.json with all intermediate artifacts.
    Extract {
        #[command(flatten)]
        input: RecordingArgs,
        #[command(flatten)]
        seg: SegArgs,
        #[command(flatten)]
        cls: ClassifyArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, env = "VID2TRACE_CHECKPOINT")]
        checkpoint: Option<PathBuf>,
    },
    /// Train the tap localizer on fixture taps.
    Train {
        /// Directory of fixtures (or one fixture); default renders the train profile.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Number of generated training recordings when --fixtures is absent.
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, env = "VID2TRACE_EPOCHS")]
        epochs: Option<usize>,
        #[arg(long, env = "VID2TRACE_LR")]
        lr: Option<f64>,
        #[arg(long, env = "VID2TRACE_BATCH")]
        batch: Option<usize>,
        /// Checkpoint file to write.
        #[arg(long, short, default_value = "model.ckpt")]
        out: PathBuf,
    },
    /// Map a trace onto a new screenshot.
    Match {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        screen: PathBuf,
        /// Detections JSON; without it, detections come from --ocr and the screenshot.
        #[arg(long)]
        detections: Option<PathBuf>,
        /// OCR sidecar for the screenshot, used when --detections is absent.
        #[arg(long)]
        ocr: Option<PathBuf>,
        /// Replay plan file to write.
        #[arg(long, short, default_value = "replay_plan.json")]
        out: PathBuf,
    },
    /// Score one or all phases against fixture ground truth.
    Eval {
        /// segmentation, classification, localization, replay or all.
        #[arg(long, default_value = "all")]
        phase: String,
        /// Directory of fixtures (or one fixture).
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Built-in corpus to render when --fixtures is absent.
        #[arg(long, default_value = "smoke")]
        profile: String,
        /// Token drop probability applied to OCR before classification.
        #[arg(long, default_value_t = 0.0)]
        noise_drop: f64,
        #[arg(long, env = "VID2TRACE_CHECKPOINT")]
        checkpoint: Option<PathBuf>,
        /// Resolution multiplier of the replay screens.
        #[arg(long, default_value_t = 2)]
        replay_scale: usize,
        /// Write the scores as JSON here too.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Render a built-in corpus to disk.
    GenFixtures {
        #[arg(long, default_value = "smoke")]
        profile: String,
        #[arg(long, short)]
        out: PathBuf,
        /// Integer magnification of every frame.
        #[arg(long, default_value_t = 1)]
        scale: usize,
        #[arg(long, default_value_t = 0.0)]
        noise_drop: f64,
        #[arg(long, default_value_t = 0.0)]
        noise_perturb: f64,
    },
    /// Draw interaction markers on keyframes.
    Annotate {
        recording: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.deterministic {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(1).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(Stage::Config.exit_code());
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.stage.exit_code())
        }
    }
}
