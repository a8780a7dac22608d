//! The autoregressive generation loop and paired-sample construction.
//!
//! Every step renders guidance views from the spatial memory along the
//! upcoming poses, "generates" the chunk with the ray-cast oracle plus
//! noise, fuses the chunk (with its context frames) into a fresh TSDF
//! volume, and merges the extracted static points back into memory.

mod clips;

pub use clips::{build_pair, chunk_bounds, segment_clips, Clip, PairedSample, CLIP_LENGTH, SOURCE_LENGTH};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};
use crate::memory::{
    align_chunk, AlignmentMode, EpisodicMemory, IcpConfig, SpatialMemory, WorkingMemory, DEFAULT_CONTEXT, DEFAULT_EPISODIC_CAPACITY,
    DEFAULT_REVEAL_THRESHOLD,
};
use crate::render::{render_points, reveal_fraction, RenderedView, DEFAULT_SPLAT_RADIUS};
use crate::tsdf::{FusionConfig, GridSpec, TsdfVolume};
use crate::types::{DepthMap, Frame, PointCloud};
use crate::worldsim::{build_scene, make_trajectory, perturb_frame, render_frame, NoiseModel, Preset, SyntheticScene, TrajectorySpec};

/// Where the world comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SceneSpec {
    Preset {
        preset: Preset,
        seed: u64,
        /// Drop the preset's moving objects.
        #[serde(default)]
        static_only: bool,
    },
    Custom {
        scene: SyntheticScene,
    },
}

impl SceneSpec {
    pub fn build(&self) -> Result<SyntheticScene> {
        let scene = match self {
            SceneSpec::Preset {
                preset,
                seed,
                static_only,
            } => {
                let s = build_scene(*seed, *preset);
                if *static_only {
                    s.static_only()
                } else {
                    s
                }
            }
            SceneSpec::Custom { scene } => scene.clone(),
        };
        scene.validate()?;
        Ok(scene)
    }
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec::Preset {
            preset: Preset::RoomWithMover,
            seed: 0,
            static_only: false,
        }
    }
}

/// A camera path that walks into the room and back out along the same poses.
pub fn default_room_trajectory() -> TrajectorySpec {
    TrajectorySpec::ForwardReverse {
        start: [-0.8, 1.4, -2.7],
        end: [0.6, 1.5, -1.2],
        yaw_start_deg: -25.0,
        yaw_end_deg: 20.0,
        pitch_deg: -5.0,
    }
}

pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::from_fov(160, 120, 60.0).expect("valid default intrinsics")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Frames per generation step (`N`).
    pub chunk_length: usize,
    /// Context frames carried into each step (`k + 1`).
    pub context: usize,
    pub intrinsics: CameraIntrinsics,
    /// Requested TSDF voxel edge, also the memory deduplication cell (meters).
    pub voxel_size: f64,
    pub splat_radius: u32,
    pub fusion: FusionConfig,
    pub noise: NoiseModel,
    pub trajectory: TrajectorySpec,
    /// Length of the sampled trajectory; defaults to the frames the run needs
    /// (rounded up to even for forward-reverse paths).
    pub trajectory_frames: Option<usize>,
    pub scene: SceneSpec,
    pub alignment: AlignmentMode,
    pub icp: IcpConfig,
    pub reveal_threshold: f64,
    pub episodic_capacity: usize,
    /// Blend generated pixels toward the memory rendering where the two agree.
    pub spatial_guidance: bool,
    /// Assumed per-channel std of memory colors in the guidance blend.
    pub memory_color_sigma: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            chunk_length: 49,
            context: DEFAULT_CONTEXT,
            intrinsics: default_intrinsics(),
            voxel_size: 0.05,
            splat_radius: DEFAULT_SPLAT_RADIUS,
            fusion: FusionConfig::default(),
            noise: NoiseModel::default(),
            trajectory: default_room_trajectory(),
            trajectory_frames: None,
            scene: SceneSpec::default(),
            alignment: AlignmentMode::KnownPoses,
            icp: IcpConfig::default(),
            reveal_threshold: DEFAULT_REVEAL_THRESHOLD,
            episodic_capacity: DEFAULT_EPISODIC_CAPACITY,
            spatial_guidance: true,
            memory_color_sigma: 0.01,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.context == 0 {
            return Err(Error::invalid("context must be at least 1"));
        }
        if self.chunk_length <= self.context {
            return Err(Error::invalid(format!(
                "chunk length {} must exceed the context {}",
                self.chunk_length, self.context
            )));
        }
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::invalid(format!("voxel size must be positive, got {}", self.voxel_size)));
        }
        if !(self.memory_color_sigma > 0.0 && self.memory_color_sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "memory color sigma must be positive, got {}",
                self.memory_color_sigma
            )));
        }
        self.intrinsics.validate()?;
        self.fusion.validate()?;
        self.noise.validate()?;
        EpisodicMemory::new(self.reveal_threshold, self.episodic_capacity)?;
        Ok(())
    }

    /// Frames generated in step `step` (1-based).
    pub fn frames_in_step(&self, step: usize) -> usize {
        if step <= 1 {
            self.chunk_length
        } else {
            self.chunk_length - self.context
        }
    }

    /// Total frames produced by `n_steps` steps.
    pub fn frames_for_steps(&self, n_steps: usize) -> usize {
        (1..=n_steps).map(|s| self.frames_in_step(s)).sum()
    }

    /// Samples the camera path for an `n_steps` run.
    pub fn poses(&self, n_steps: usize) -> Result<Vec<CameraPose>> {
        let needed = self.frames_for_steps(n_steps);
        let n = match self.trajectory_frames {
            Some(n) => n,
            None if matches!(self.trajectory, TrajectorySpec::ForwardReverse { .. }) => needed + needed % 2,
            None => needed.max(2),
        };
        if n < needed || n < self.chunk_length {
            return Err(Error::invalid(format!(
                "trajectory has {n} frames but {n_steps} steps need {needed}"
            )));
        }
        make_trajectory(&self.trajectory, n)
    }
}

/// Audit trail of one generation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based step number.
    pub step: usize,
    pub frames: Vec<Frame>,
    /// Ground-truth static labels of each generated frame.
    pub static_masks: Vec<Vec<bool>>,
    /// Memory renderings at each frame's pose, taken before this step's merge.
    pub condition_views: Vec<RenderedView>,
    pub reveal_fractions: Vec<f64>,
    /// Indices of frames admitted to the episodic bank.
    pub episodic_added: Vec<i64>,
    pub spatial_before: usize,
    pub spatial_after: usize,
    pub extracted_points: usize,
    pub tsdf_dims: [usize; 3],
    pub tsdf_voxel: f64,
    pub alignment_rms: f64,
    pub alignment_diverged: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub poses: Vec<CameraPose>,
    pub records: Vec<StepRecord>,
    pub spatial: SpatialMemory,
    pub episodic: EpisodicMemory,
    pub working: WorkingMemory,
}

impl RunOutput {
    /// Generated frames of every step in stream order.
    pub fn frames(&self) -> impl Iterator<Item = &Frame> + '_ {
        self.records.iter().flat_map(|r| r.frames.iter())
    }
}

/// Blends a generated frame toward the memory rendering. Pixels take part
/// when the memory covers them at a depth consistent with the generated
/// surface and with a color inside the combined noise band; they are
/// combined by inverse-variance weighting.
fn apply_guidance(generated: &mut Frame, truth_depth: &DepthMap, view: &RenderedView, cfg: &PipelineConfig) {
    let sg2 = cfg.noise.rgb_sigma * cfg.noise.rgb_sigma;
    if sg2 == 0.0 {
        return;
    }
    let sm2 = cfg.memory_color_sigma * cfg.memory_color_sigma;
    let lambda = sg2 / (sg2 + sm2);
    let band = 3.0 * (sg2 + sm2).sqrt();
    let truth = truth_depth.depths();
    let mem_depth = view.depth.depths();
    let mem_rgb = view.image.pixels();
    for (k, px) in generated.image.pixels_mut().iter_mut().enumerate() {
        if !view.mask[k] || !DepthMap::is_valid_depth(truth[k]) {
            continue;
        }
        let tol = (2.0 * cfg.voxel_size).max(0.02 * truth[k] as f64);
        if (mem_depth[k] as f64 - truth[k] as f64).abs() > tol {
            continue;
        }
        let m = mem_rgb[k];
        if (0..3).any(|c| ((m[c] - px[c]) as f64).abs() > band) {
            continue;
        }
        for c in 0..3 {
            px[c] = (px[c] as f64 + lambda * (m[c] as f64 - px[c] as f64)).clamp(0.0, 1.0) as f32;
        }
    }
}

/// Fuses `frames` into a fresh volume snapped to the memory's cell lattice
/// and returns it with the extracted static points. `None` when no frame
/// has a valid depth.
pub fn fuse_frames(frames: &[&Frame], voxel_size: f64, fusion: &FusionConfig) -> Result<Option<(TsdfVolume, PointCloud)>> {
    let Some((lo, hi)) = chunk_bounds(frames.iter().copied()) else {
        return Ok(None);
    };
    let pad = Vector3::repeat(fusion.truncation_for(voxel_size) + voxel_size);
    let (lo, hi) = (lo - pad, hi + pad);
    let mut grid = GridSpec::fit(lo, hi, voxel_size, fusion.max_grid_dim)?;
    let v = grid.voxel_size;
    let snapped = lo.map(|x| (x / v).floor() * v);
    if snapped != grid.origin {
        grid = GridSpec::fit(snapped, hi, v, fusion.max_grid_dim)?;
    }
    let mut volume = TsdfVolume::with_grid(grid, fusion.truncation_for(grid.voxel_size))?;
    for f in frames {
        volume.integrate_frame(f, fusion)?;
    }
    let points = volume.extract_static_points(fusion);
    Ok(Some((volume, points)))
}

/// Runs `n_steps` generation steps.
pub fn run_autoregressive(cfg: &PipelineConfig, n_steps: usize) -> Result<RunOutput> {
    cfg.validate()?;
    if n_steps == 0 {
        return Err(Error::invalid("at least one step is required"));
    }
    let scene = cfg.scene.build()?;
    let poses = cfg.poses(n_steps)?;
    let mut spatial = SpatialMemory::new(cfg.voxel_size)?;
    let mut episodic = EpisodicMemory::new(cfg.reveal_threshold, cfg.episodic_capacity)?;
    let mut working = WorkingMemory::new(cfg.context)?;
    let mut records = Vec::with_capacity(n_steps);
    let mut next = 0usize;

    for step in 1..=n_steps {
        let count = cfg.frames_in_step(step);
        let positions = next..next + count;
        next += count;
        let record = run_step(cfg, &scene, &poses, step, positions, &mut spatial, &mut episodic, &mut working)?;
        records.push(record);
    }
    Ok(RunOutput {
        poses,
        records,
        spatial,
        episodic,
        working,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_step(
    cfg: &PipelineConfig,
    scene: &SyntheticScene,
    poses: &[CameraPose],
    step: usize,
    positions: std::ops::Range<usize>,
    spatial: &mut SpatialMemory,
    episodic: &mut EpisodicMemory,
    working: &mut WorkingMemory,
) -> Result<StepRecord> {
    let intr = &cfg.intrinsics;
    let spatial_before = spatial.len();

    // (1) guidance views from the memory as it stands before this chunk
    let condition_views: Vec<RenderedView> = positions
        .clone()
        .into_par_iter()
        .map(|p| render_points(spatial.cloud(), intr, &poses[p], cfg.splat_radius))
        .collect();

    // (2) generate the chunk
    let generated: Vec<(Frame, Vec<bool>)> = positions
        .clone()
        .into_par_iter()
        .zip(condition_views.par_iter())
        .map(|(p, view)| {
            let t = p as i64;
            let oracle = render_frame(scene, &poses[p], intr, t);
            let mut frame = perturb_frame(&oracle.frame, &cfg.noise, t);
            if cfg.spatial_guidance {
                apply_guidance(&mut frame, &oracle.frame.depth, view, cfg);
            }
            (frame, oracle.static_mask)
        })
        .collect();
    let (frames, static_masks): (Vec<Frame>, Vec<Vec<bool>>) = generated.into_iter().unzip();

    // (3) fuse context + chunk, extract, align, merge
    let to_fuse: Vec<&Frame> = working.window().chain(frames.iter()).collect();
    let fused = fuse_frames(&to_fuse, cfg.voxel_size, &cfg.fusion).map_err(|e| e.at_step(step, None))?;
    let (tsdf_dims, tsdf_voxel, extracted) = match fused {
        Some((vol, pts)) => (vol.dims(), vol.voxel_size(), pts),
        None => ([0; 3], cfg.voxel_size, PointCloud::default()),
    };
    let alignment = if spatial.is_empty() || extracted.is_empty() {
        align_chunk(&extracted, spatial, AlignmentMode::KnownPoses, &cfg.icp)
    } else {
        align_chunk(&extracted, spatial, cfg.alignment, &cfg.icp)
    }
    .map_err(|e| e.at_step(step, None))?;
    spatial
        .merge(&extracted, &alignment.transform)
        .map_err(|e| e.at_step(step, None))?;

    // (4) episodic selection from the pre-merge views
    let reveal_fractions: Vec<f64> = condition_views.iter().map(reveal_fraction).collect();
    let mut episodic_added = Vec::new();
    for (frame, &reveal) in frames.iter().zip(&reveal_fractions) {
        if episodic.consider(frame, reveal).map_err(|e| e.at_step(step, Some(frame.index)))? {
            episodic_added.push(frame.index);
        }
    }

    // (5) slide the working window
    for frame in &frames {
        working.push(frame.clone()).map_err(|e| e.at_step(step, Some(frame.index)))?;
    }

    Ok(StepRecord {
        step,
        frames,
        static_masks,
        condition_views,
        reveal_fractions,
        episodic_added,
        spatial_before,
        spatial_after: spatial.len(),
        extracted_points: extracted.len(),
        tsdf_dims,
        tsdf_voxel,
        alignment_rms: alignment.rms,
        alignment_diverged: alignment.diverged,
    })
}
