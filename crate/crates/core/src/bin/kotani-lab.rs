use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use kotani_lab::cli::{run, CliError, Command, ExperimentConfig, Format};

/// Numerical experiments on ergodic matrix-valued Jacobi operators.
#[derive(Parser, Debug)]
#[command(name = "kotani-lab", version)]
struct Args {
    /// lyapunov | ids | thouless | weyl | kotani | ac-scan | verify
    command: String,
    /// INI experiment file
    #[arg(long)]
    config: PathBuf,
    /// Output file (stdout when omitted); metadata goes to <out>.meta.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Override a scalar field, as section.key=value (bare keys belong to [run])
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Optional cap on worker threads.
const THREADS_ENV: &str = "KOTANI_LAB_THREADS";

fn threads() -> Result<usize, CliError> {
    let requested = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| CliError::validation("invalid_threads", format!("{THREADS_ENV}='{v}'")))?,
        ),
        Err(_) => None,
    };
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = requested {
            // only fails if a pool already exists, which cannot happen this early
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(rayon::current_num_threads())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = requested;
        Ok(1)
    }
}

fn execute(args: Args) -> Result<(), CliError> {
    let command: Command = args.command.parse()?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::validation("config_unreadable", format!("{}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::parse(&text, Some(command), &args.set)?;
    if let Some(f) = &args.format {
        config.output.format = f.parse::<Format>()?;
    }
    if let Some(p) = &args.out {
        config.output.path = Some(p.display().to_string());
    }
    let threads = threads()?;

    let start = Instant::now();
    let record = run(&config)?;
    let wall = start.elapsed().as_secs_f64();
    let body = record.body(config.output.format)?;
    let meta = record.metadata(wall, threads);

    match &config.output.path {
        Some(path) => {
            let unwritable = |e: std::io::Error| CliError::validation("output_unwritable", format!("{path}: {e}"));
            std::fs::write(path, &body).map_err(unwritable)?;
            std::fs::write(format!("{path}.meta.json"), &meta).map_err(unwritable)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&body)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::validation("output_unwritable", format!("stdout: {e}")))?;
            eprint!("{}", String::from_utf8_lossy(&meta));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("kotani-lab: {}", CliError::validation("usage", first));
            return ExitCode::from(1);
        }
    };
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kotani-lab: {e}");
            ExitCode::from(e.code)
        }
    }
}
