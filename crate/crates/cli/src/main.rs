use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use leafsight_core::pipeline::{run, PipelineConfig, RunOptions, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Segment,
    Extract,
    Select,
    TrainGate,
    TrainDisease,
    Crossval,
    Predict,
    Report,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Segment => Subcommand::Segment,
            Command::Extract => Subcommand::Extract,
            Command::Select => Subcommand::Select,
            Command::TrainGate => Subcommand::TrainGate,
            Command::TrainDisease => Subcommand::TrainDisease,
            Command::Crossval => Subcommand::Crossval,
            Command::Predict => Subcommand::Predict,
            Command::Report => Subcommand::Report,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kernel {
    Linear,
    Quadratic,
    Cubic,
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Lesion {
    Dark,
    Bright,
}

/// Two-stage leaf disease identification.
#[derive(Debug, Parser)]
#[command(name = "leafsight", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Corpus root (one subdirectory per class), or a single image for predict.
    #[arg(long)]
    root: Option<PathBuf>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for artifacts and run.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    kernel: Option<Kernel>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_enum)]
    lesion: Option<Lesion>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn load_config(cli: &Cli) -> leafsight_core::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::parse(&fs::read_to_string(path)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(k) = cli.kernel {
        let name = k.to_possible_value().expect("named variant");
        cfg.set("kernel", name.get_name())?;
    }
    if let Some(f) = cli.folds {
        cfg.cv_folds = f;
    }
    if let Some(l) = cli.lesion {
        let name = l.to_possible_value().expect("named variant");
        cfg.set("lesion", name.get_name())?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cmd = Subcommand::from(cli.command);
    let opts = RunOptions {
        root: cli.root,
        out: cli.out,
        config,
        jobs: cli.jobs,
    };
    match run(cmd, &opts) {
        Ok(record) => {
            for w in &record.warnings {
                eprintln!("warning: {w}");
            }
            for a in &record.artifacts {
                println!("{}  {}", a.sha256, a.path);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {cmd}: {e}");
            ExitCode::FAILURE
        }
    }
}
