use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vvlab::cli::run_subcommand;
use vvlab::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "vvlab", about = "Vanishing-viscosity experiment driver", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Experiment config file (flat key = value format)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's base seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write full space-time path dumps
    #[arg(long, global = true)]
    dump: bool,
    /// Override the config's output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble and write per-path summary functionals
    Solve,
    /// Spatial modulus curves and rate fits across the epsilon list
    RatesSpace,
    /// Temporal modulus curve, rate fit, and interpolation table
    RatesTime,
    /// Refinement study of the discrete interaction identity residual
    InteractionCheck,
    /// Entropy defect lower bound on a value lattice
    LemmaCheck,
    /// Weight-class constants and embedding report
    VerifyWeights,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::RatesSpace => "rates-space",
            Command::RatesTime => "rates-time",
            Command::InteractionCheck => "interaction-check",
            Command::LemmaCheck => "lemma-check",
            Command::VerifyWeights => "verify-weights",
        }
    }
}

fn run(args: &Args) -> vvlab::Result<()> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    run_subcommand(args.command.name(), &cfg, args.dump)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
