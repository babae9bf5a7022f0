//! `qfeat`: data generation, training, evaluation and geometric diagnostics
//! for layered quantum classifiers.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfeat::ansatz::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "qfeat", version, about = "Train and diagnose layered quantum classifiers")]
struct Cli {
    /// Root directory for generated data and experiment outputs.
    #[arg(long, global = true, env = "QFEAT_OUT", default_value = "runs")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write train/val/test CSVs for a hypersphere scenario or split an existing CSV.
    GenData(GenDataArgs),
    /// Train a model over several seeded runs and write checkpoints and a summary.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a CSV file.
    Evaluate(EvaluateArgs),
    /// Jacobian ranks and geometric classification of an ansatz or CLA map.
    Diagnose(DiagnoseArgs),
    /// Gate and weight counts of an aCLS model next to the matching PDR model.
    Counts(CountsArgs),
    /// One-qubit fidelity and derivative grids, closed form against simulator.
    FidelityScan(FidelityScanArgs),
    /// Run the invariant suite; exits with status 2 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// `sphere-1sigma`, `sphere-3sigma` or `csv`.
    #[arg(long, default_value = "sphere-3sigma")]
    pub scenario: String,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_val: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Source file for the `csv` scenario.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Output directory; defaults to `<out>/data/<scenario>`.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long)]
    pub d_inp: Option<usize>,
    #[arg(long)]
    pub d_out: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub psi0_seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long)]
    pub lr_patience: Option<usize>,
    #[arg(long)]
    pub early_stop: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Base seed for weight initialization and batch order.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hypersphere scenario to generate in memory.
    #[arg(long, conflicts_with = "data_dir")]
    pub scenario: Option<String>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_val: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Directory with train.csv, val.csv and test.csv.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub n_classes: Option<usize>,
    /// Feed CSV features unscaled.
    #[arg(long)]
    pub no_scale: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Scaler written by `train` for CSV data.
    #[arg(long)]
    pub scaler: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Ansatz or CLA-map JSON; otherwise the model flags below are used.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value = "acls")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 2)]
    pub qubits: usize,
    #[arg(long, default_value_t = 6)]
    pub d_inp: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub x_low: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub x_high: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_std: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CountsArgs {
    /// aCLS qubit count.
    #[arg(long, default_value_t = 2)]
    pub qubits: usize,
    #[arg(long, default_value_t = 6)]
    pub d_inp: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FidelityScanArgs {
    /// Points per axis over `[-π, π]`.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Output directory; defaults to `<out>/fidelity-scan`.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<commands::VerifyFailed>().is_some() {
            return 2;
        }
        if let Some(qfeat::Error::Divergence { .. }) = cause.downcast_ref::<qfeat::Error>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(&cli.out, a),
        Command::Train(a) => commands::train(&cli.out, a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Counts(a) => commands::counts(a),
        Command::FidelityScan(a) => commands::fidelity_scan(&cli.out, a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
