//! `blender`: batch front-end for the blender-core experiments.
//!
//! Each subcommand reads one JSON config, writes its artifacts into `--out`
//! and exits with 0 (ok), 2 (validation failure), 3 (infeasible or gate
//! failed) or 4 (I/O or config error).

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::Config;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "blender", version, about = "Blender-horseshoe experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the raster resolution.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    ValidateParams,
    SearchParams,
    Orbit,
    Encode,
    Decode,
    ClassifyCode,
    Wasserstein,
    Historic,
    ScheduleNormalize,
    CheckD2,
    ConeCheck,
    Growth,
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = Config::load(cli.config.as_deref())?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.resolution.is_some() {
        cfg.resolution = cli.resolution;
    }
    if !matches!(cli.command, Command::ValidateParams | Command::SearchParams) {
        commands::require_valid(&cfg)?;
    }
    let ctx = Ctx { cfg, out: commands::out_dir(cli.out.as_deref()) };
    match cli.command {
        Command::ValidateParams => commands::validate_params(&ctx),
        Command::SearchParams => commands::search(&ctx),
        Command::Orbit => commands::orbit_cmd(&ctx),
        Command::Encode => commands::encode_cmd(&ctx),
        Command::Decode => commands::decode_cmd(&ctx),
        Command::ClassifyCode => commands::classify(&ctx),
        Command::Wasserstein => commands::wasserstein(&ctx),
        Command::Historic => commands::historic(&ctx),
        Command::ScheduleNormalize => commands::schedule_normalize(&ctx),
        Command::CheckD2 => commands::check_d2_cmd(&ctx),
        Command::ConeCheck => commands::cone(&ctx),
        Command::Growth => commands::growth(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("blender: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
