use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::Parser;
use gl_lab_cli::config::KEY_HELP;
use gl_lab_cli::{execute, Command, Format, Invocation};

const COMMANDS: [&str; 7] = ["psi", "solve", "witness", "sweep", "theta50-scan", "check-assumptions", "tail-check"];

/// Group Lasso support-recovery experiments.
#[derive(Parser)]
#[command(name = "gl-lab", version, after_help = KEY_HELP)]
struct Args {
    /// Command to run; may instead be given as `command` in the config.
    #[arg(value_parser = PossibleValuesParser::new(COMMANDS).map(|s| s.parse::<Command>().expect("listed command")))]
    command: Option<Command>,

    /// Configuration file (`key = value` lines or a JSON object).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output file; a `<out>.meta.json` sidecar is written next to it. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads, 0 for one per core. Falls back to GL_LAB_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let inv = Invocation {
        command: args.command,
        config: args.config,
        out: args.out,
        format: args.format,
        seed: args.seed,
        threads: args.threads,
    };
    match execute(&inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gl-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
