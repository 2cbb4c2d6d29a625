//! `surfflow` command-line driver: runs scenarios described by configuration files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use surfflow::cli_io::{parse_config, run_scenario, RunOptions, ScenarioConfig, ScenarioKind};
use surfflow::Error;

#[derive(Parser)]
#[command(name = "surfflow", version, about = "Surface-layer gas flow simulator")]
struct Cli {
    /// Number of worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputFlags {
    /// Output directory, overriding `[output] directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Steps between snapshots, overriding `[output] snapshot_every`.
    #[arg(long)]
    snapshot_every: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario named by the file's `kind`.
    Run {
        /// Configuration file.
        config: PathBuf,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Write the coefficient table for the configured potentials.
    Coeffs {
        /// Configuration file.
        config: PathBuf,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Run a cross-model study.
    Study {
        /// Study to run.
        kind: StudyKind,
        /// Configuration file.
        config: PathBuf,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Parse and validate a configuration without running it.
    Validate {
        /// Configuration file.
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyKind {
    DiffusionLimit,
    Homogenization,
    Coupling,
}

impl From<StudyKind> for ScenarioKind {
    fn from(k: StudyKind) -> Self {
        match k {
            StudyKind::DiffusionLimit => ScenarioKind::StudyDiffusionLimit,
            StudyKind::Homogenization => ScenarioKind::StudyHomogenization,
            StudyKind::Coupling => ScenarioKind::StudyCoupling,
        }
    }
}

fn execute(cfg: ScenarioConfig, output: OutputFlags) -> Result<bool, Error> {
    let opts = RunOptions {
        out_dir: output.out,
        snapshot_every: output.snapshot_every,
    };
    let summary = run_scenario(&cfg, &opts)?;
    if let Some(report) = &summary.report {
        println!("{report}");
    }
    println!("{}", summary.line());
    Ok(summary.passed.unwrap_or(true))
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run { config, output } => execute(parse_config(&config)?, output),
        Command::Coeffs { config, output } => {
            let cfg = parse_config(&config)?.with_kind(ScenarioKind::Coeffs)?;
            execute(cfg, output)
        }
        Command::Study { kind, config, output } => {
            let cfg = parse_config(&config)?.with_kind(kind.into())?;
            execute(cfg, output)
        }
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            println!("{}: valid {} configuration", config.display(), cfg.kind);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("study criteria not met");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
