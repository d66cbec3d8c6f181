mod commands;
mod config;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration, detected before any work starts.
    Usage(String),
    Run(glf_core::Error),
}

impl From<glf_core::Error> for CliError {
    fn from(e: glf_core::Error) -> Self {
        CliError::Run(e)
    }
}

/// Whether every requested item was processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Partial,
}

#[derive(Debug, Parser)]
#[command(name = "glf", version, about = "Landmark patches, spectral features and expression classification for 3D face scans")]
pub struct Cli {
    /// JSON file overriding the default run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for synthesis and fold assignment.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// More log output; repeat for debug level.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled dataset with a manifest.
    Synth(SynthArgs),
    /// Write a manifest for a directory of BU-3DFE named scans.
    Ingest(IngestArgs),
    /// Eigendecompose the graph Laplacian of the canonical patch once.
    Basis(BasisArgs),
    /// Cut canonical patches for every scan and store them as archives.
    Patches(PatchesArgs),
    /// Extract per-scan feature vectors.
    Features(FeaturesArgs),
    /// Run cross-validated expression or AU experiments.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Number of synthetic subjects.
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Intensity levels per expression (1..=4).
    #[arg(long)]
    pub levels: Option<u8>,
    /// Comma-separated expression codes, e.g. AN,HA.
    #[arg(long, value_delimiter = ',')]
    pub expressions: Option<Vec<String>>,
    /// Multiplier on every deformation amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Grid spacing in millimetres.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Standard deviation of per-vertex Gaussian jitter in millimetres.
    #[arg(long)]
    pub jitter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory holding `<stem>.<ext>` meshes and `<stem>.csv` landmarks.
    #[arg(long)]
    pub dir: PathBuf,
    /// Manifest to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Mesh file extension.
    #[arg(long, default_value = "obj")]
    pub ext: String,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PatchArgs {
    /// Radius of the innermost level curve in mm.
    #[arg(long)]
    pub lambda_min: Option<f64>,
    /// Radius of the outermost level curve in mm.
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Number of level curves K.
    #[arg(long)]
    pub curves: Option<usize>,
    /// Samples per curve m.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    /// Basis file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub patch: PatchArgs,
    /// Eigenpairs to keep (default: all).
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Glf,
    Shapedna,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Coords,
    Norms,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MissingArg {
    ZeroFill,
    Drop,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FrameArg {
    Translated,
    NormalAligned,
}

#[derive(Debug, Args)]
pub struct PatchesArgs {
    /// Scan manifest (CSV or JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for archives and `patches.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub patch: PatchArgs,
    /// Keep patches in the mesh orientation or rotate the apex normal onto +z.
    #[arg(long, value_enum)]
    pub frame: Option<FrameArg>,
    /// Landmark labels to use (default: those of the first scan).
    #[arg(long, value_delimiter = ',')]
    pub landmarks: Option<Vec<String>>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["manifest", "patches"])))]
pub struct FeaturesArgs {
    /// Scan manifest (CSV or JSON).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// `patches.json` written by the `patches` subcommand.
    #[arg(long)]
    pub patches: Option<PathBuf>,
    /// Feature file; `.csv` selects CSV, anything else the binary format.
    #[arg(long)]
    pub out: PathBuf,
    /// Feature family.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// GLF coefficients per coordinate or their per-row norms.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Eigenpairs (GLF) or eigenvalues (Shape-DNA) per patch.
    #[arg(long)]
    pub k: Option<usize>,
    /// Precomputed basis file from the `basis` subcommand (GLF only).
    #[arg(long)]
    pub basis: Option<PathBuf>,
    /// Drop the constant eigenvector from GLF features.
    #[arg(long)]
    pub skip_constant: bool,
    /// Scans with missing patches: zero-fill those blocks or drop the scan.
    #[arg(long, value_enum)]
    pub missing: Option<MissingArg>,
    /// Keep patches in the mesh orientation or rotate the apex normal onto +z.
    #[arg(long, value_enum)]
    pub frame: Option<FrameArg>,
    #[command(flatten)]
    pub patch: PatchArgs,
    /// Landmark labels to use (default: those of the first scan).
    #[arg(long, value_delimiter = ',')]
    pub landmarks: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Expressions,
    Aus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassifierArg {
    Svm,
    Flda,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Rbf,
    Linear,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Feature file from the `features` subcommand.
    #[arg(long)]
    pub features: PathBuf,
    /// Report JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Six-class expression recognition or per-AU detection.
    #[arg(long, value_enum, default_value = "expressions")]
    pub task: TaskArg,
    /// Classifier (default: svm).
    #[arg(long, value_enum)]
    pub classifier: Option<ClassifierArg>,
    /// SVM kernel (default: rbf).
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// SVM box constraint.
    #[arg(short = 'C', long = "svm-c")]
    pub c: Option<f64>,
    /// RBF width (default 1 / feature dimension).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Identity-disjoint cross-validation folds (default: 10).
    #[arg(long)]
    pub folds: Option<usize>,
    /// Use only the first k eigen-components of each patch.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated k values for an accuracy sweep over shared folds.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<usize>>,
    /// Second feature file evaluated on the same folds for a paired comparison.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Also evaluate with expression labels shuffled within the data.
    #[arg(long)]
    pub control: bool,
    /// Seed for the label shuffle of the control run.
    #[arg(long, default_value_t = 99)]
    pub control_seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => {
            eprintln!("finished with errors; see the error section of the output");
            ExitCode::from(3)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
