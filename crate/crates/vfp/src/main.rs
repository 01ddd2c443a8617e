use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vfp::{dispatch, init_threads, Command, RunConfig};

/// Vlasov–Fokker–Planck phase-space solver and audit harness.
#[derive(Parser, Debug)]
#[command(name = "vfp", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap's usage-error code 2 would read as "flags only"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> vfp::Result<u8> {
    let threads = init_threads()?;
    log::info!("{threads} worker threads");
    let cfg = RunConfig::load(&cli.config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| vfp::Error::Validation {
            field: "out".into(),
            reason: "pass --out or set `out` in the config".into(),
        })?;
    let resolved = cfg.resolved(cli.seed)?;
    let report = dispatch(cli.command, &resolved, &out)?;
    print!("{}", report.to_table());
    println!("status: {}", report.status().as_str());
    Ok(report.exit_code() as u8)
}
