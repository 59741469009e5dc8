use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use fuzzymon_cli::output::{config_hash, Sink};
use fuzzymon_cli::{run, CliError, Command, ExperimentConfig, Format};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    Evolve,
    Sample,
    Figure,
    Regime,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Simulate continuous fuzzy energy measurement of few-level systems.
#[derive(Debug, Parser)]
#[command(name = "fuzzymon", version)]
struct Args {
    command: CommandArg,
    /// Flat key = value config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides sample.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides output.format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    let command = match args.command {
        CommandArg::Evolve => Command::Evolve,
        CommandArg::Sample => Command::Sample,
        CommandArg::Figure => Command::Figure,
        CommandArg::Regime => Command::Regime,
    };
    let sink = Sink { dir: args.out.clone(), format: cfg.format, command: command.name(), hash: config_hash(&cfg) };
    let base_dir = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let outcome = run(command, &cfg, &base_dir, &sink)?;
    print!("{}", outcome.stdout);
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fuzzymon: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
