use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "lab", version, about = "Lateral Cauchy problem lab: estimates, forward solves and data completion")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments named in a scenario config.
    Run { config: PathBuf },
    /// Repeat a scenario over values of one numeric key.
    Sweep {
        config: PathBuf,
        /// Key to vary, e.g. `s0`, `eps` or `weights.lambda`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; may be empty.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

fn parse_values(list: &str) -> anyhow::Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|e| anyhow::anyhow!("bad sweep value {v:?}: {e}")))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Run { config } => lab::run(&config, cli.out),
        Command::Sweep { config, axis, values } => {
            parse_values(&values).and_then(|v| lab::sweep(&config, &axis, &v, cli.out))
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
