use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use curvex::{run, Experiment, RunConfig, RunOptions};

/// Numerical checks of small-time curvature expansions.
#[derive(Debug, Parser)]
#[command(name = "curvex", version)]
struct Args {
    /// expand_L, expand_W, volume, isoprofile, symmetrize, mu, rigidity or moments_selftest
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `[output] dir`, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Omit the timestamp so identical runs produce identical JSON.
    #[arg(long)]
    no_timestamp: bool,
}

const EXIT_ERROR: u8 = 1;
const EXIT_TOLERANCE: u8 = 2;

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let cfg = match RunConfig::from_text(&text, Some(args.experiment), args.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let out_dir = args
        .out
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    match run(&cfg, &RunOptions { out_dir, timestamp: !args.no_timestamp }) {
        Ok(r) => {
            let verdict = if r.pass { "pass" } else { "tolerance failure" };
            println!("{}: {verdict} ({})", args.experiment, r.json_path.display());
            if r.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_TOLERANCE)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
