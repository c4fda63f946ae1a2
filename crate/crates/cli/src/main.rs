//! `lmsqkd`: run protocol sessions, attack studies and key-rate analysis.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 protocol abort.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lmsqkd", version, about = "Mediated semi-quantum key distribution simulator")]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, env = "LMSQKD_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=1024))]
    pub threads: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one protocol session and write its transcript.
    Simulate(SimulateArgs),
    /// Export the key-rate lower bound as CSV.
    KeyrateCurve(CurveArgs),
    /// Locate the error rate at which the key rate reaches zero.
    Threshold(ThresholdArgs),
    /// Quantify fake-photon detection or collective-attack leakage.
    Attack(AttackArgs),
    /// Report qubit efficiency, theoretical or from a transcript.
    Efficiency(EfficiencyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Honest,
    Noise,
    FakeZ,
    FakeX,
    Collective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FakeBasis {
    Z,
    X,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 4000)]
    pub rounds: u64,
    /// Probability that Alice applies H.
    #[arg(long, default_value_t = 0.5)]
    pub pa: f64,
    /// Probability that Bob applies H.
    #[arg(long, default_value_t = 0.5)]
    pub pb: f64,
    #[arg(long, default_value_t = 0.5)]
    pub check_fraction: f64,
    /// Abort when the estimated QBER exceeds this value.
    #[arg(long, default_value_t = 0.08)]
    pub threshold: f64,
    /// Extra bits removed by privacy amplification.
    #[arg(long, default_value_t = 0)]
    pub margin: usize,
    #[arg(long, default_value_t = 100)]
    pub min_check_bits: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Honest)]
    pub strategy: StrategyArg,
    /// Bit-flip probability for the noise strategy.
    #[arg(long)]
    pub flip: Option<f64>,
    /// Collective-attack parameters (JSON).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Transcript output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include per-round records in the transcript.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, default_value_t = 0.0)]
    pub min: f64,
    #[arg(long, default_value_t = 0.15)]
    pub max: f64,
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 5e-4)]
    pub tol: f64,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("kind").required(true).args(["fake_photon", "collective"])))]
pub struct AttackArgs {
    /// Basis of the fake photon pairs.
    #[arg(long, value_enum)]
    pub fake_photon: Option<FakeBasis>,
    /// Evaluate a collective attack given by --params.
    #[arg(long, requires = "params")]
    pub collective: bool,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Numbers of compared results.
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
    pub m: Vec<u32>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Sampled rounds for the empirical guessing accuracy.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.5)]
    pub pa: f64,
    #[arg(long, default_value_t = 0.5)]
    pub pb: f64,
}

#[derive(Debug, Args)]
pub struct EfficiencyArgs {
    #[arg(long, default_value_t = 0.5)]
    pub pa: f64,
    #[arg(long, default_value_t = 0.5)]
    pub pb: f64,
    #[arg(long, default_value_t = 0.5)]
    pub check_fraction: f64,
    /// Report the realized efficiency of a saved session.
    #[arg(long)]
    pub from_transcript: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads as usize)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| commands::run(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
