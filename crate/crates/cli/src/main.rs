use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracpoly_cli::{run, Overrides};

/// Moments, correlations and Monte-Carlo validation for time-changed polynomial processes.
#[derive(Debug, Parser)]
#[command(name = "fracpoly", version)]
struct Args {
    /// Job file (TOML, or JSON with a .json extension).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.path`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(n) = args.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let overrides = Overrides { output: args.output, seed: args.seed };
    match run(&args.config, &overrides) {
        Ok(path) => {
            eprintln!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
