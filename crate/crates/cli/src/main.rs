use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use relaysim_cli::config::ExperimentKind;
use relaysim_cli::{run, Overrides, EXIT_RUNTIME};

/// Outage experiments for full-duplex relay channels at low SNR.
#[derive(Parser, Debug)]
#[command(name = "relaysim", version)]
struct Cli {
    /// Experiment to run; must match the config's "kind".
    kind: ExperimentKind,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path (overrides "output").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides "master_seed").
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials (overrides "trials").
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        output: cli.out,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        pool = pool.num_threads(w.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("relaysim: cannot start workers: {e}");
            return ExitCode::from(EXIT_RUNTIME as u8);
        }
    };
    match pool.install(|| run(cli.kind, &cli.config, &ov)) {
        Ok(path) => {
            eprintln!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("relaysim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
