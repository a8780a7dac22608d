//! Resolved run configuration: config file, then flags, then seed fan-out.

use std::path::{Path, PathBuf};

use clap::Args;
use geomem::memory::AlignmentMode;
use geomem::pipeline::{PipelineConfig, SceneSpec};
use geomem::worldsim::Preset;
use geomem::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a subcommand needs besides its input paths. Written back as
/// `config.json` with every default materialized; feeding that file to the
/// same subcommand reproduces its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    /// Seeds both the preset scene and the generation noise.
    pub seed: u64,
    /// Generation steps for `run`.
    pub steps: usize,
    /// Frames rendered by `simulate`.
    pub frames: usize,
    /// Output location; flags take precedence. Not echoed, so the resolved
    /// config is independent of where it was written.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            seed: 0,
            steps: 3,
            frames: 60,
            out: None,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads for internal parallelism (outputs do not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (or report file for eval-* commands).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scene preset: room-with-mover or corridor.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Drop the preset's moving objects.
    #[arg(long)]
    pub static_only: bool,
    #[arg(long)]
    pub voxel_size: Option<f64>,
    /// Truncation distance in meters (default five voxels).
    #[arg(long)]
    pub truncation: Option<f64>,
    /// Reveal threshold for episodic memory.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Context frames carried between steps.
    #[arg(long)]
    pub context: Option<usize>,
    /// Frames per generation step.
    #[arg(long)]
    pub chunk: Option<usize>,
    #[arg(long)]
    pub splat_radius: Option<u32>,
    /// Per-channel RGB noise std.
    #[arg(long)]
    pub noise_rgb: Option<f64>,
    /// Depth noise std relative to depth.
    #[arg(long)]
    pub noise_depth: Option<f64>,
    /// known-poses or icp.
    #[arg(long)]
    pub alignment: Option<AlignmentMode>,
}

fn invalid(msg: String) -> Error {
    Error::InvalidInput(msg)
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| invalid(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let p = &mut cfg.pipeline;
        if let Some(v) = self.voxel_size {
            p.voxel_size = v;
        }
        if let Some(v) = self.truncation {
            p.fusion.truncation = Some(v);
        }
        if let Some(v) = self.theta {
            p.reveal_threshold = v;
        }
        if let Some(v) = self.context {
            p.context = v;
        }
        if let Some(v) = self.chunk {
            p.chunk_length = v;
        }
        if let Some(v) = self.splat_radius {
            p.splat_radius = v;
        }
        if let Some(v) = self.noise_rgb {
            p.noise.rgb_sigma = v;
        }
        if let Some(v) = self.noise_depth {
            p.noise.depth_sigma_rel = v;
        }
        if let Some(v) = self.alignment {
            p.alignment = v;
        }
        if let Some(preset) = self.preset {
            p.scene = SceneSpec::Preset {
                preset,
                seed: 0,
                static_only: self.static_only,
            };
        } else if self.static_only {
            match &mut p.scene {
                SceneSpec::Preset { static_only, .. } => *static_only = true,
                SceneSpec::Custom { .. } => return Err(invalid("--static-only needs a preset scene".into())),
            }
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        cfg.apply_seed();
        cfg.pipeline.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    fn apply_seed(&mut self) {
        self.pipeline.noise.seed = self.seed;
        if let SceneSpec::Preset { seed, .. } = &mut self.pipeline.scene {
            *seed = self.seed;
        }
    }

    pub fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| invalid("an output location is required (--out)".into()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
