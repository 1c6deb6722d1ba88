use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cellquad::config::{Overrides, RunConfig};
use cellquad::pipeline;
use cellquad::Result;

#[derive(Parser)]
#[command(name = "cellquad", version, about = "Cell detection dataset builder and evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output root.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Experiment preset (exp1..exp6) or a name for the configured classes.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    fold: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Merge BF and GFP channels into RGB composites.
    Merge(Common),
    /// Convert instance masks into label files.
    ImportMasks(Common),
    /// Split composites and labels into four quadrants.
    Tile {
        #[command(flatten)]
        common: Common,
        /// Clip straddling boxes into every tile they touch instead of dropping them.
        #[arg(long)]
        clip: bool,
    },
    /// Write the dataset bundle for one experiment and fold.
    Build(Common),
    /// Score a detections file against the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Detections JSON; `{fold}` is replaced by the fold index.
        #[arg(long)]
        detections: Option<String>,
    },
    /// Build and evaluate every fold and average the results.
    Crossval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        detections: Option<String>,
    },
    /// Generate synthetic plates, or mock detections for existing labels.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mock_detect: bool,
        #[arg(long)]
        detections: Option<String>,
    },
}

fn load(c: &Common, detections: Option<String>, clip: bool) -> Result<RunConfig> {
    let o = Overrides {
        seed: c.seed,
        jobs: c.jobs,
        out: c.out.clone(),
        manifest: c.manifest.clone(),
        experiment: c.experiment.clone(),
        fold: c.fold,
        detections,
        clip,
    };
    RunConfig::load(c.config.as_deref(), &o)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Merge(c) => {
            let n = pipeline::cmd_merge(&load(&c, None, false)?)?;
            println!("composites: {n}");
        }
        Command::ImportMasks(c) => {
            let stats = pipeline::cmd_import_masks(&load(&c, None, false)?)?;
            println!("images: {}", stats.len());
            println!("cells: {}", stats.iter().map(|s| s.kept).sum::<usize>());
        }
        Command::Tile { common, clip } => {
            let stats = pipeline::cmd_tile(&load(&common, None, clip)?)?;
            let kept: usize = stats.iter().map(|s| s.per_tile.iter().sum::<usize>()).sum();
            println!("full-image annotations: {}", stats.iter().map(|s| s.total).sum::<usize>());
            println!("tile annotations: {kept}");
            println!("straddling: {}", stats.iter().map(|s| s.straddling).sum::<usize>());
        }
        Command::Build(c) => {
            let lists = pipeline::cmd_build(&load(&c, None, false)?)?;
            println!("train: {}  valid: {}  test: {}", lists.train.len(), lists.valid.len(), lists.test.len());
        }
        Command::Eval { common, detections } => {
            let cfg = load(&common, detections, false)?;
            let out = pipeline::cmd_eval(&cfg)?;
            print!("{}", cellquad::report::summary_text(&out.report));
        }
        Command::Crossval { common, detections } => {
            let cfg = load(&common, detections, false)?;
            let summary = pipeline::cmd_crossval(&cfg)?;
            print!("{}", cellquad::report::fold_table(&summary.rows));
        }
        Command::Synth {
            common,
            mock_detect,
            detections,
        } => {
            let cfg = load(&common, detections, false)?;
            if mock_detect {
                println!("detections: {}", pipeline::cmd_mock_detect(&cfg)?);
            } else {
                println!("planted cells: {}", pipeline::cmd_synth(&cfg)?);
            }
        }
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
