use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hubbard_mf_lab::{run, Command, Request};

#[derive(Parser)]
#[command(name = "hubbard-mf-lab", version, about = "Exact vs mean-field Bose-Hubbard dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Evolve the many-body state.
    Exact(Common),
    /// Evolve the mean-field state.
    Meanfield(Common),
    /// Run both and write the comparison series.
    Compare(Common),
    /// Compare across lattice dimensions.
    Sweep(Common),
    /// Run the invariant suite.
    Check(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Exact(c) => (Command::Exact, c),
        Sub::Meanfield(c) => (Command::MeanField, c),
        Sub::Compare(c) => (Command::Compare, c),
        Sub::Sweep(c) => (Command::Sweep, c),
        Sub::Check(c) => (Command::Check, c),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let req = Request {
        command,
        config: common.config,
        seed: common.seed,
        out: common.out,
    };
    match run(&req) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
