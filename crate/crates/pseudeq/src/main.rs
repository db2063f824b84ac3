use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use pseudeq::commands::{self, BaselineConfig, EvalConfig, KyotoPhaseConfig, ScarfConfig, TrainCommandConfig};
use pseudeq::dataset::GenDataConfig;
use pseudeq::{io, threads, HarnessError, Result};

#[derive(Parser, Debug)]
#[command(name = "pseudeq", version, about = "Equilibrium learning experiments for pseudo-games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate train/valid/test instance files.
    GenData,
    /// Train a generator on a dataset.
    Train,
    /// Evaluate a model or reference predictor on one split.
    Eval,
    /// Tune and run a baseline solver.
    Baseline,
    /// Tâtonnement price path on the Scarf economy.
    Scarf,
    /// Equilibrium types over a Kyoto revenue grid.
    KyotoPhase,
}

fn config<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C> {
    match path {
        Some(p) => io::read_json(p),
        None => Ok(C::default()),
    }
}

fn run(cli: &Cli) -> Result<()> {
    threads::init_from_env()?;
    let path = cli.config.as_deref();
    let manifest = match cli.command {
        Command::GenData => commands::gen_data(&config::<GenDataConfig>(path)?, cli.seed, &cli.out)?,
        Command::Train => commands::train::run(&config::<TrainCommandConfig>(path)?, cli.seed, &cli.out)?,
        Command::Eval => commands::eval::run(&config::<EvalConfig>(path)?, cli.seed, &cli.out)?,
        Command::Baseline => commands::baseline::run(&config::<BaselineConfig>(path)?, cli.seed, &cli.out)?,
        Command::Scarf => commands::scarf::run(&config::<ScarfConfig>(path)?, cli.seed, &cli.out)?,
        Command::KyotoPhase => commands::kyoto_phase::run(&config::<KyotoPhaseConfig>(path)?, cli.seed, &cli.out)?,
    };
    println!("{}: {} ({} files in {})", manifest.command, manifest.status, manifest.outputs.len(), cli.out.display());
    for note in &manifest.notes {
        println!("  {}", note);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &HarnessError) -> u8 {
    e.exit_code() as u8
}
