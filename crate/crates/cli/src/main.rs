//! anomalyscan: J-K contrarian/momentum research pipelines on monthly equity
//! panels. Subcommands: backtest, scan, regress, regimes, synth.
//!
//! Configuration comes from an optional TOML file (`--config`) overridden by
//! flags; flags win. The effective configuration is echoed to the output
//! directory and its hash stamped into every output file, so identical
//! configs and inputs produce byte-identical output directories.
//! `ANOMALYSCAN_THREADS` caps the worker pool.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use commands::CmdError;
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "anomalyscan", version, about = "Cross-sectional contrarian/momentum research engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Strategy return series and raw mean/t table over the (J, K) grid.
    Backtest(CommonArgs),
    /// Moving-window significance scan over the (J, K) grid.
    Scan(CommonArgs),
    /// CAPM, three-factor, and condition-dummy regressions per (J, K) cell.
    Regress(CommonArgs),
    /// Market-condition regime series and high/low performance splits.
    Regimes(CommonArgs),
    /// Deterministic synthetic fixtures in the input CSV schemas.
    Synth(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Monthly panel CSV (stock,year,month,return).
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Factor CSV (year,month,mkt,smb,hml[,index_logret][,macro_index]).
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Daily bars CSV (stock,date,return,volume).
    #[arg(long)]
    bars: Option<PathBuf>,
    /// Estimation periods, comma separated (e.g. 1,12,36).
    #[arg(long, value_delimiter = ',')]
    j: Option<Vec<u32>>,
    /// Holding periods, comma separated.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<u32>>,
    /// Months skipped between estimation and holding.
    #[arg(long)]
    skip: Option<u32>,
    /// Scan window length M in months.
    #[arg(long)]
    window: Option<usize>,
    /// Scan step a in months.
    #[arg(long)]
    step: Option<usize>,
    /// Newey-West lag: an integer or "auto".
    #[arg(long)]
    lag: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for synthetic fixtures.
    #[arg(long)]
    seed: Option<u64>,
    /// Print full float precision instead of six significant digits.
    #[arg(long)]
    raw: bool,
}

fn effective_config(args: &CommonArgs) -> Result<RunConfig, CmdError> {
    let mut config = match &args.config {
        Some(path) => {
            commands::preflight(path)?;
            let text = std::fs::read_to_string(path).map_err(|e| CmdError {
                code: 1,
                message: format!("cannot read config {}: {e}", path.display()),
            })?;
            toml::from_str(&text).map_err(|e| CmdError {
                code: 1,
                message: format!("bad config {}: {e}", path.display()),
            })?
        }
        None => RunConfig::default(),
    };

    if let Some(p) = &args.panel {
        config.inputs.panel = Some(p.clone());
    }
    if let Some(p) = &args.factors {
        config.inputs.factors = Some(p.clone());
    }
    if let Some(p) = &args.bars {
        config.inputs.bars = Some(p.clone());
    }
    if let Some(j) = &args.j {
        config.strategy.j = Some(j.clone());
    }
    if let Some(k) = &args.k {
        config.strategy.k = Some(k.clone());
    }
    if let Some(skip) = args.skip {
        config.strategy.skip = skip;
    }
    if let Some(window) = args.window {
        config.scan.window = window;
    }
    if let Some(step) = args.step {
        config.scan.step = step;
    }
    if let Some(lag) = &args.lag {
        config.hac.lag = match lag.as_str() {
            "auto" => None,
            n => Some(n.parse().map_err(|_| CmdError {
                code: 1,
                message: format!("--lag must be an integer or \"auto\", got {n:?}"),
            })?),
        };
    }
    if let Some(out) = &args.out {
        config.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.synth.seed = seed;
    }
    if args.raw {
        config.output.raw = true;
    }
    Ok(config)
}

fn cap_threads() {
    if let Ok(value) = std::env::var("ANOMALYSCAN_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring ANOMALYSCAN_THREADS={value:?} (want a positive integer)"),
        }
    }
}

fn main() -> ExitCode {
    cap_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            // Usage problems are validation failures.
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };

    let (args, run): (&CommonArgs, fn(&RunConfig) -> Result<(), CmdError>) = match &cli.command {
        Command::Backtest(a) => (a, commands::cmd_backtest),
        Command::Scan(a) => (a, commands::cmd_scan),
        Command::Regress(a) => (a, commands::cmd_regress),
        Command::Regimes(a) => (a, commands::cmd_regimes),
        Command::Synth(a) => (a, commands::cmd_synth),
    };

    let outcome = effective_config(args).and_then(|config| run(&config));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
