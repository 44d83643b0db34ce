use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use diracbag::cli::{exit, exit_code, run, RunConfig, RunOptions};

/// Eigenvalue curves of Dirac operators with bag-type boundary conditions.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Run file of key = value lines.
    #[arg(long)]
    config: PathBuf,
    /// Output path; overrides `out` in the run file. Standard output when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for ball sweeps.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Directory for the Bessel zero cache; falls back to DIRACBAG_CACHE.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    let cfg = match RunConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("diracbag: {}: {e}", args.config.display());
            return ExitCode::from(exit_code(&e));
        }
    };
    let opts = RunOptions { threads: args.threads.max(1), cache_dir: RunOptions::resolve_cache(args.cache_dir) };
    let art = match run(&cfg, &opts) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("diracbag: {:?} run failed: {e}", cfg.mode);
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = art
        .extra
        .iter()
        .try_for_each(|(path, text)| std::fs::write(path, text))
        .and_then(|()| match args.out.or(cfg.output) {
            Some(path) => std::fs::write(path, art.primary()),
            None => {
                print!("{}", art.primary());
                Ok(())
            }
        });
    if let Err(e) = written {
        eprintln!("diracbag: cannot write output: {e}");
        return ExitCode::from(exit::USAGE);
    }
    if art.verification_failed() {
        if let Some(report) = &art.report {
            eprint!("{}", report.lines().filter(|l| l.starts_with("FAIL")).map(|l| format!("{l}\n")).collect::<String>());
        }
        return ExitCode::from(exit::VERIFY);
    }
    ExitCode::from(exit::OK)
}
