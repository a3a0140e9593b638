use std::path::PathBuf;
use std::process::ExitCode;

use chaoslab_cli::{execute, load, output_dir, report_error, CliError, Invocation, Kind};
use clap::Parser;

/// Run a chaoslab experiment from a TOML config.
#[derive(Parser, Debug)]
#[command(name = "chaoslab", version)]
struct Args {
    /// Experiment kind: cumulant-scan, glauber-scan, meanfield-bias, bogolyubov-variance,
    /// clt, dispersion-scan, lb-eval, lb-laplace or verify.
    kind: Kind,
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for the replica pool.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `plan.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let inv = Invocation { kind: args.kind, config_path: args.config, threads: args.threads, out: args.out, seed: args.seed };
    if let Some(n) = inv.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("{}", serde_json::json!({ "error": "usage", "messages": [e.to_string()] }));
            return ExitCode::from(2);
        }
    }
    match execute(&inv) {
        Ok(done) => {
            println!("{} {} -> {} ({})", inv.kind, done.hash, done.dir.display(), if done.passed { "passed" } else { "FAILED" });
            if done.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let cfg = load(&inv).ok().map(|(c, _)| c);
            let dir = output_dir(&inv, cfg.as_ref());
            let rec = report_error(&dir, &inv, &e);
            eprintln!("{rec}");
            ExitCode::from(match e {
                CliError::Config(_) | CliError::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}
