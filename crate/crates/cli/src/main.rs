use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nehari_cli::{exit_code, run, CliError, Command, ConfigFile, RunConfig};

/// Ground states and multiple solutions of coupled Schrödinger systems.
#[derive(Parser)]
#[command(name = "nehari", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `[solve] seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact label (overrides `[output] label`).
    #[arg(long)]
    label: Option<String>,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let mut file = ConfigFile::parse(&text)?;
    if let Some(out) = &args.out {
        file.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        file.solve.seed = seed;
    }
    if let Some(label) = &args.label {
        file.output.label = label.clone();
    }
    Ok(RunConfig { command: args.command, file })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = load(&args).and_then(|cfg| run(&cfg, &mut std::io::stdout()));
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&result) as u8)
}
