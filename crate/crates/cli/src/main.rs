use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use voxcurate::experiment::{Model, RunConfig, RunDir, SelectMode};
use voxcurate::Result;

#[derive(Parser)]
#[command(name = "voxcurate", version, about = "Active corpus curation and speaker generation on a simulated pool")]
struct Cli {
    /// Run configuration (JSON). Defaults to the acceptance preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override every seed in the configuration with ones derived from this.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory holding the run's artifacts.
    #[arg(long, global = true, default_value = "runs/default")]
    run_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ours,
    Baseline,
    Initial,
    Unselected,
}

impl From<ModeArg> for SelectMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ours => SelectMode::Ours,
            ModeArg::Baseline => SelectMode::Baseline,
            ModeArg::Initial => SelectMode::Initial,
            ModeArg::Unselected => SelectMode::Unselected,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Diffusion,
    Gmm,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Diffusion => Model::Diffusion,
            ModelArg::Gmm => Model::Gmm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Acceptance,
    Small,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the simulated world (sources, samples, embeddings).
    World,
    /// Shuffle sources and split them into acquisition rounds.
    Plan,
    /// Drop samples that fail the alignment or speaker-compactness checks.
    Screen,
    /// Build one corpus.
    Select {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Corpus size for the baseline; defaults to the size of `ours`.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit the whitening map and a generator on the training speakers.
    SgTrain {
        #[arg(long, value_enum)]
        model: ModelArg,
    },
    /// Draw synthetic speakers from a trained generator.
    SgSample {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        n: usize,
        /// Mixture size for `--model gmm`; defaults to the largest fitted.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Compute quality tables, histograms, W1 and distance summaries.
    Eval,
    /// Render the text summary and SVG charts.
    Report,
    /// Run every stage in order.
    Pipeline,
    /// Print a configuration preset as JSON.
    InitConfig {
        #[arg(long, value_enum, default_value = "acceptance")]
        preset: Preset,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::acceptance(0),
    };
    if let Some(seed) = cli.seed {
        config = config.reseeded(seed);
    }
    if let Command::InitConfig { preset } = cli.command {
        let cfg = match preset {
            Preset::Acceptance => RunConfig::acceptance(cli.seed.unwrap_or(0)),
            Preset::Small => RunConfig::small(cli.seed.unwrap_or(0)),
        };
        println!("{}", cfg.to_json_pretty());
        return Ok(());
    }
    let dir = RunDir::new(&cli.run_dir, config)?;
    match cli.command {
        Command::World => dir.cmd_world()?,
        Command::Plan => dir.cmd_plan()?,
        Command::Screen => dir.cmd_screen()?,
        Command::Select { mode, n } => {
            let mode = SelectMode::from(mode);
            let size = dir.cmd_select(mode, n)?;
            println!("{mode}: {size} samples");
        }
        Command::SgTrain { model } => dir.cmd_sg_train(model.into())?,
        Command::SgSample { model, n, m } => {
            let path = dir.cmd_sg_sample(model.into(), n, m)?;
            println!("{}", path.display());
        }
        Command::Eval => {
            dir.cmd_eval()?;
        }
        Command::Report => print!("{}", dir.cmd_report()?),
        Command::Pipeline => print!("{}", dir.cmd_pipeline()?),
        Command::InitConfig { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
