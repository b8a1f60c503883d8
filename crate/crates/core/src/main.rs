use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use freeshell::cli::{run_pipeline, Command, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "freeshell",
    version,
    about = "Flatten curved shells into printable tile-and-connector plates"
)]
struct Args {
    #[command(subcommand)]
    command: Stage,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Input mesh (OBJ or STL); overrides `input` in the config.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Stage {
    /// Load the input mesh and optionally remesh it.
    Remesh,
    /// Compute the flat layout.
    Flatten,
    /// Build tiles, connectors and the print recipe from a saved layout.
    Plate,
    /// Measure a saved layout and plate.
    Verify,
    /// Run every stage in order.
    All,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match &args.config {
        Some(path) => PipelineConfig::from_path(path),
        None => Ok(PipelineConfig::default()),
    };
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.input.is_some() {
        cfg.input = args.input;
    }
    if args.out.is_some() {
        cfg.output_dir = args.out;
    }
    let cmd = match args.command {
        Stage::Remesh => Command::Remesh,
        Stage::Flatten => Command::Flatten,
        Stage::Plate => Command::Plate,
        Stage::Verify => Command::Verify,
        Stage::All => Command::All,
    };
    let verbose = args.verbose;
    let mut log = |line: &str| {
        if verbose {
            eprintln!("{line}");
        }
    };
    match run_pipeline(cmd, &cfg, &mut log) {
        Ok(summary) => {
            for path in &summary.artifacts {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
