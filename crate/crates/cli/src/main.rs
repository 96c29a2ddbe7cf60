use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jcdsim::{parse_config, run_to_dir, CliError};

/// Simulate the two-site Jaynes-Cummings-Hubbard dimer from a TOML config.
#[derive(Parser, Debug)]
#[command(name = "jcdsim", version)]
struct Args {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Worker threads for sweeps (defaults to the number of CPUs).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let path = args.config.display().to_string();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {path}: {e}");
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(CliError::Config { line, message }) => {
            eprintln!("error: {path}:{line}: {message}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {path}: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = args.output.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let stem = args.config.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = args.jobs {
        pool = pool.num_threads(k.max(1));
    }
    let result = pool.build().map_err(CliError::from).and_then(|pool| pool.install(|| run_to_dir(&cfg, &dir, &stem)));
    match result {
        Ok(files) => {
            println!("wrote {} and {}", files.csv.display(), files.metadata.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("diagnostics: {}", dir.join(format!("{stem}.diagnostics.txt")).display());
            ExitCode::from(1)
        }
    }
}
