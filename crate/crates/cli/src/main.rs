//! Command-line entry point.
//!
//! Exit status: 0 on success, 2 for invalid input (flags, configs, files),
//! 1 for internal failures. Failures print one line prefixed `error:`.

mod commands;
mod config;
mod framedir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geomem::{Error, Result};

use config::CommonArgs;

#[derive(Parser)]
#[command(name = "geomem", version, about = "Geometry-grounded spatial memory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render oracle frames and ground-truth static masks for a scene.
    Simulate {
        /// Number of frames (overrides the config's `frames`).
        #[arg(long)]
        frames: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fuse a frame directory into a TSDF checkpoint and a static point cloud.
    Fuse {
        #[arg(long, value_name = "DIR")]
        frames_dir: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render condition views of a point cloud along a trajectory.
    Render {
        #[arg(long, value_name = "PATH")]
        ply: PathBuf,
        #[arg(long, value_name = "PATH")]
        trajectory: PathBuf,
        /// Camera intrinsics JSON (default: the config's intrinsics).
        #[arg(long, value_name = "PATH")]
        intrinsics: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the autoregressive pipeline and write every artifact.
    Run {
        /// Generation steps (overrides the config's `steps`).
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Split a frame directory into 97-frame source/target clips.
    Segment {
        #[arg(long, value_name = "DIR")]
        frames_dir: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Build condition/target training pairs from a frame directory.
    BuildPairs {
        #[arg(long, value_name = "DIR")]
        frames_dir: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score forward/reverse view recall of a `run` directory.
    EvalRecall {
        #[arg(long, value_name = "DIR")]
        run_dir: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score dynamic suppression of a `fuse` output against its scene.
    EvalSuppression {
        /// `simulate` output holding the scene description.
        #[arg(long, value_name = "DIR")]
        frames_dir: PathBuf,
        /// `fuse` output.
        #[arg(long, value_name = "DIR")]
        fused: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate { common, .. }
            | Command::Fuse { common, .. }
            | Command::Render { common, .. }
            | Command::Run { common, .. }
            | Command::Segment { common, .. }
            | Command::BuildPairs { common, .. }
            | Command::EvalRecall { common, .. }
            | Command::EvalSuppression { common, .. } => common,
        }
    }
}

fn execute(command: Command) -> Result<()> {
    let common = command.common();
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
    }
    let mut cfg = common.resolve()?;
    match &command {
        Command::Simulate { frames, .. } => {
            if let Some(n) = frames {
                cfg.frames = *n;
            }
            commands::simulate(&cfg)
        }
        Command::Fuse { frames_dir, .. } => commands::fuse(&cfg, frames_dir),
        Command::Render {
            ply,
            trajectory,
            intrinsics,
            ..
        } => commands::render(&cfg, ply, trajectory, intrinsics.as_deref()),
        Command::Run { steps, .. } => {
            if let Some(n) = steps {
                cfg.steps = *n;
            }
            commands::run(&cfg)
        }
        Command::Segment { frames_dir, .. } => commands::segment(&cfg, frames_dir),
        Command::BuildPairs { frames_dir, .. } => commands::build_pairs(&cfg, frames_dir),
        Command::EvalRecall { run_dir, .. } => commands::eval_recall(&cfg, run_dir),
        Command::EvalSuppression { frames_dir, fused, .. } => commands::eval_suppression(&cfg, frames_dir, fused),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
