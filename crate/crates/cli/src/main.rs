mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Synthesize I/Q datasets, transform them, and train or evaluate
/// modulation classifiers.
#[derive(Parser, Debug)]
#[command(name = "rfmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate labeled train/test containers.
    Synth(SynthArgs),
    /// Apply the convolutional transform or STFT to a container.
    Convert(ConvertArgs),
    /// Train a model with SGD and keep the minimum-test-loss checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a container.
    Eval(EvalArgs),
    /// Verify model gradients against central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug, serde::Serialize)]
struct SynthArgs {
    /// Comma-separated modulations, or the presets `rf1024` / `radioml`.
    #[arg(long, default_value = "rf1024")]
    classes: String,
    #[arg(long, default_value_t = 1000)]
    train_per_class: usize,
    #[arg(long, default_value_t = 200)]
    test_per_class: usize,
    #[arg(long, default_value_t = 1024)]
    n_samples: usize,
    /// `grid` (0..18 dB step 2), `grid:LO:HI:STEP`, `fixed:DB` or `noiseless`.
    #[arg(long, default_value = "grid")]
    snr: String,
    /// How grid SNRs are assigned to frames.
    #[arg(long, value_enum, default_value_t = SnrDraw::Uniform)]
    snr_draw: SnrDraw,
    #[arg(long, default_value_t = 8)]
    samples_per_symbol: usize,
    #[arg(long, default_value_t = 0.35)]
    rrc_rolloff: f64,
    #[arg(long, default_value_t = 0.3)]
    gmsk_bt: f64,
    #[arg(long, default_value_t = 0.1)]
    fm_deviation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; defaults to $RFMC_OUT_DIR or the current directory.
    #[arg(long, env = "RFMC_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum SnrDraw {
    Uniform,
    Stratified,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum Transform {
    Ct,
    Stft,
}

#[derive(Args, Debug, serde::Serialize)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    transform: Transform,
    /// CT filter count; defaults to N/4.
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long, default_value_t = 128)]
    win: usize,
    #[arg(long, default_value_t = 112)]
    overlap: usize,
    /// FFT length; defaults to the window length.
    #[arg(long)]
    fft_len: Option<usize>,
    #[arg(long, default_value_t = 256)]
    out_size: usize,
    /// Seed of the fixed CT weights.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum ModelKind {
    /// CONV-5 over raw `[2,N]` frames.
    Conv5,
    /// Residual image network over `[2,W,W]` tensors.
    Imagecnn,
    /// Learnable convolutional transform feeding the image network.
    CtImagecnn,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum InitKind {
    He,
    Lecun,
    Uniform,
    Glorot,
}

#[derive(Args, Debug, serde::Serialize)]
struct TrainArgs {
    /// Directory holding `train.*` and `test.*` containers.
    #[arg(long, required_unless_present_all = ["train", "test"])]
    data: Option<PathBuf>,
    #[arg(long, conflicts_with = "data", requires = "test")]
    train: Option<PathBuf>,
    #[arg(long, conflicts_with = "data", requires = "train")]
    test: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelKind::Conv5)]
    model: ModelKind,
    /// Comma-separated channel widths (5 for conv5, 3 for the image models).
    #[arg(long)]
    widths: Option<String>,
    #[arg(long, value_enum, default_value = "lecun")]
    init: InitKind,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f32,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "RFMC_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum Format {
    Csv,
    Markdown,
    Json,
}

#[derive(Args, Debug, serde::Serialize)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, serde::Serialize)]
struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Conv5)]
    model: ModelKind,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    perturbation: f64,
    /// Coordinates checked per tensor; 0 checks every coordinate.
    #[arg(long, default_value_t = 6)]
    per_tensor: usize,
    #[arg(long)]
    widths: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
