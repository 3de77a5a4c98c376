//! Pipeline CLI: analyze an exemplar crowd video, synthesize and render a
//! virtual crowd along its dominant paths, and score the similarity.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crowdsynth_core::config::PipelineConfig;
use crowdsynth_core::pipeline;

#[derive(Parser)]
#[command(name = "crowdsynth", version, about)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration file (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config value, e.g. --set sim.population=20. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<PipelineConfig> {
        PipelineConfig::load_with_overrides(&self.config, &self.sets)
            .with_context(|| format!("loading config {}", self.config.display()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract motion vectors, dominant directions, and global paths.
    Analyze {
        #[command(flatten)]
        config: ConfigArgs,
        /// Process the clip in temporal chunks of this many frames and
        /// combine the per-chunk paths.
        #[arg(long)]
        chunk_size: Option<usize>,
    },
    /// Simulate a crowd along a paths file, writing trajectories.
    Synthesize {
        #[command(flatten)]
        config: ConfigArgs,
        /// Paths CSV (defaults to <output.dir>/paths.csv).
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Render a trajectory file into frames.
    Render {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trajectory CSV (defaults to <output.dir>/trajectories.csv).
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Score two frame directories against each other.
    Score {
        #[command(flatten)]
        config: ConfigArgs,
        frames_a: PathBuf,
        frames_b: PathBuf,
    },
    /// Full run: analyze, synthesize, render, score, and write a manifest.
    Pipeline {
        #[command(flatten)]
        config: ConfigArgs,
        /// Instead of one run, sweep population x goal tightness x
        /// {none, diversified, random-paths} scenarios over these
        /// comma-separated populations.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("warning: could not set thread count: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Analyze { config, chunk_size } => {
            let config = config.load()?;
            let outputs = match chunk_size {
                Some(size) => pipeline::run_analyze_chunked(&config, size)?,
                None => pipeline::run_analyze(&config)?,
            };
            println!("vectors:    {}", outputs.vectors.display());
            println!("directions: {}", outputs.directions.display());
            println!("paths:      {}", outputs.paths.display());
        }
        Command::Synthesize { config, paths } => {
            let config = config.load()?;
            let paths = paths
                .or_else(|| config.sim.paths.clone())
                .unwrap_or_else(|| config.output.dir.join("paths.csv"));
            let trajectories = pipeline::run_synthesize(&config, &paths)?;
            println!("trajectories: {}", trajectories.display());
        }
        Command::Render { config, trajectories } => {
            let config = config.load()?;
            let trajectories =
                trajectories.unwrap_or_else(|| config.output.dir.join("trajectories.csv"));
            let frames = pipeline::run_render(&config, &trajectories)?;
            println!("frames: {}", frames.display());
        }
        Command::Score {
            config,
            frames_a,
            frames_b,
        } => {
            let config = config.load()?;
            let report = pipeline::run_score(&config, &frames_a, &frames_b)?;
            println!(
                "score={:.6} windows={} coefficient={:.6}",
                report.score, report.compared_windows, report.mean_coefficient
            );
        }
        Command::Pipeline { config, grid } => {
            let config = config.load()?;
            match grid {
                Some(populations) => {
                    let cells = pipeline::run_grid(&config, &populations)?;
                    println!("population  goals  scenario     score");
                    for cell in cells {
                        println!(
                            "{:>10}  {:<5}  {:<11}  {:.4}",
                            cell.population, cell.goal_mode, cell.scenario, cell.score
                        );
                    }
                }
                None => {
                    let (report, manifest) = pipeline::run_pipeline(&config)?;
                    println!(
                        "score={:.6} windows={}",
                        report.score, report.compared_windows
                    );
                    println!("manifest: {}", manifest.display());
                }
            }
        }
    }
    Ok(())
}
