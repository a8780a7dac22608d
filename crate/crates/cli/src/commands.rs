//! Subcommand bodies. Each reads its inputs, writes artifacts under the
//! output location and finishes with a JSON manifest listing them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use geomem::eval::{suppression_metrics, view_recall_eval, RecallSample};
use geomem::io::{self, PoseRecord};
use geomem::pipeline::{build_pair, fuse_frames, run_autoregressive, segment_clips, StepRecord};
use geomem::render::{render_points, reveal_fraction};
use geomem::tsdf::TsdfVolume;
use geomem::worldsim::{make_trajectory, perturb_frame, render_frame, SyntheticScene, TrajectorySpec};
use geomem::{Error, Frame, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::framedir::{self, name};

const CONFIG: &str = "config.json";
const MANIFEST: &str = "manifest.json";
const SCENE: &str = "scene.json";
/// Full sampled camera path of a `run`, including poses without frames.
const PATH: &str = "path.json";
const TSDF: &str = "tsdf.ckpt";
const POINTS: &str = "points.ply";

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn finish(out: &Path, command: &str, cfg: &RunConfig, details: Value) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(CONFIG), cfg.to_json()?)?;
    let manifest = json!({
        "command": command,
        "config": cfg,
        "details": details,
    });
    write_json(&out.join(MANIFEST), &manifest)
}

fn missing(what: &str) -> Error {
    Error::InvalidInput(format!("{what} is required"))
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out()?;
    let p = &cfg.pipeline;
    let scene = p.scene.build()?;
    // forward-reverse paths need an even length; an odd request keeps the
    // first `frames` poses of the next even path
    let even = matches!(p.trajectory, TrajectorySpec::ForwardReverse { .. }) && cfg.frames % 2 == 1;
    let mut poses = make_trajectory(&p.trajectory, cfg.frames + usize::from(even))?;
    poses.truncate(cfg.frames);
    let labeled: Vec<_> = poses
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let mut l = render_frame(&scene, pose, &p.intrinsics, i as i64);
            if !p.noise.is_zero() {
                l.frame = perturb_frame(&l.frame, &p.noise, i as i64);
            }
            l
        })
        .collect();
    framedir::write_frames(out, labeled.iter().map(|l| &l.frame), &p.intrinsics)?;
    for l in &labeled {
        framedir::write_mask(out, "masks", l.frame.index, &p.intrinsics, &l.static_mask)?;
    }
    write_json(&out.join(SCENE), &scene)?;
    eprintln!("simulate: {} frames", labeled.len());
    finish(
        out,
        "simulate",
        cfg,
        json!({
            "frame_count": labeled.len(),
            "outputs": {
                "frames": "frames",
                "masks": "masks",
                "trajectory": framedir::TRAJECTORY,
                "intrinsics": framedir::INTRINSICS,
                "scene": SCENE,
            },
        }),
    )
}

pub fn fuse(cfg: &RunConfig, frames_dir: &Path) -> Result<()> {
    let out = cfg.out()?;
    let p = &cfg.pipeline;
    let (frames, _) = framedir::read_frames(frames_dir)?;
    let refs: Vec<&Frame> = frames.iter().collect();
    let (volume, points) = fuse_frames(&refs, p.voxel_size, &p.fusion)?
        .ok_or_else(|| Error::InvalidInput(format!("{}: no valid depth to fuse", frames_dir.display())))?;
    volume.write_checkpoint(&out.join(TSDF))?;
    io::write_ply(&out.join(POINTS), &points)?;
    eprintln!("fuse: {} frames -> {} points", frames.len(), points.len());
    finish(
        out,
        "fuse",
        cfg,
        json!({
            "frame_count": frames.len(),
            "dims": volume.dims(),
            "voxel_size": volume.voxel_size(),
            "truncation": volume.truncation(),
            "points": points.len(),
            "outputs": {"tsdf": TSDF, "points": POINTS},
        }),
    )
}

pub fn render(cfg: &RunConfig, ply: &Path, trajectory: &Path, intrinsics: Option<&Path>) -> Result<()> {
    let out = cfg.out()?;
    let p = &cfg.pipeline;
    let cloud = io::read_ply(ply)?;
    let poses = io::read_trajectory(trajectory)?;
    let intr = match intrinsics {
        Some(path) => io::read_intrinsics(path)?,
        None => p.intrinsics,
    };
    let views: Vec<_> = poses
        .par_iter()
        .map(|(_, pose)| render_points(&cloud, &intr, pose, p.splat_radius))
        .collect();
    let mut reveal = Vec::with_capacity(views.len());
    for ((index, _), view) in poses.iter().zip(&views) {
        io::write_ppm(&out.join("conditions").join(name(*index, "ppm")), &view.image)?;
        io::write_pfm(&out.join("depth").join(name(*index, "pfm")), &view.depth)?;
        framedir::write_mask(out, "masks", *index, &intr, &view.mask)?;
        reveal.push(json!({"index": index, "reveal_fraction": reveal_fraction(view)}));
    }
    eprintln!("render: {} views of {} points", views.len(), cloud.len());
    finish(
        out,
        "render",
        cfg,
        json!({
            "points": cloud.len(),
            "views": reveal,
            "outputs": {"conditions": "conditions", "masks": "masks", "depth": "depth"},
        }),
    )
}

#[derive(Serialize)]
struct StepSummary {
    step: usize,
    frames: Vec<i64>,
    reveal_fractions: Vec<f64>,
    episodic_added: Vec<i64>,
    spatial_before: usize,
    spatial_after: usize,
    extracted_points: usize,
    tsdf_dims: [usize; 3],
    tsdf_voxel: f64,
    alignment_rms: f64,
    alignment_diverged: bool,
}

impl From<&StepRecord> for StepSummary {
    fn from(r: &StepRecord) -> Self {
        Self {
            step: r.step,
            frames: r.frames.iter().map(|f| f.index).collect(),
            reveal_fractions: r.reveal_fractions.clone(),
            episodic_added: r.episodic_added.clone(),
            spatial_before: r.spatial_before,
            spatial_after: r.spatial_after,
            extracted_points: r.extracted_points,
            tsdf_dims: r.tsdf_dims,
            tsdf_voxel: r.tsdf_voxel,
            alignment_rms: r.alignment_rms,
            alignment_diverged: r.alignment_diverged,
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out()?;
    let p = &cfg.pipeline;
    let result = run_autoregressive(p, cfg.steps)?;
    for r in &result.records {
        eprintln!(
            "step {}: {} frames, memory {} -> {} points, {} episodic",
            r.step,
            r.frames.len(),
            r.spatial_before,
            r.spatial_after,
            r.episodic_added.len()
        );
    }
    framedir::write_frames(out, result.frames(), &p.intrinsics)?;
    for r in &result.records {
        for ((f, mask), view) in r.frames.iter().zip(&r.static_masks).zip(&r.condition_views) {
            framedir::write_mask(out, "masks", f.index, &p.intrinsics, mask)?;
            framedir::write_mask(out, "condition_masks", f.index, &p.intrinsics, &view.mask)?;
            io::write_ppm(&out.join("conditions").join(name(f.index, "ppm")), &view.image)?;
        }
    }
    let path: Vec<_> = result.poses.iter().enumerate().map(|(i, pose)| (i as i64, *pose)).collect();
    io::write_trajectory(&out.join(PATH), &path)?;
    io::write_ply(&out.join("memory.ply"), result.spatial.cloud())?;

    let mut slots = Vec::new();
    for s in result.episodic.slots() {
        io::write_ppm(&out.join("episodic").join(name(s.frame.index, "ppm")), &s.frame.image)?;
        slots.push(json!({
            "frame": s.frame.index,
            "step_index": s.step_index,
            "reveal_score": s.reveal_score,
            "pose": PoseRecord::from_pose(s.frame.index, &s.frame.pose),
        }));
    }
    write_json(&out.join("episodic").join("slots.json"), &slots)?;

    let steps: Vec<StepSummary> = result.records.iter().map(StepSummary::from).collect();
    finish(
        out,
        "run",
        cfg,
        json!({
            "steps": steps,
            "path_length": result.poses.len(),
            "memory_points": result.spatial.len(),
            "working_memory": result.working.window().map(|f| f.index).collect::<Vec<_>>(),
            "outputs": {
                "frames": "frames",
                "masks": "masks",
                "conditions": "conditions",
                "condition_masks": "condition_masks",
                "trajectory": framedir::TRAJECTORY,
                "path": PATH,
                "intrinsics": framedir::INTRINSICS,
                "memory": "memory.ply",
                "episodic": "episodic/slots.json",
            },
        }),
    )
}

fn clip_frames(frames_dir: &Path) -> Result<Vec<Frame>> {
    let (frames, _) = framedir::read_frames(frames_dir)?;
    if frames.len() < geomem::pipeline::CLIP_LENGTH {
        return Err(Error::InvalidInput(format!(
            "{}: {} frames, a clip needs {}",
            frames_dir.display(),
            frames.len(),
            geomem::pipeline::CLIP_LENGTH
        )));
    }
    Ok(frames)
}

fn indices(frames: &[Frame]) -> Vec<i64> {
    frames.iter().map(|f| f.index).collect()
}

pub fn segment(cfg: &RunConfig, frames_dir: &Path) -> Result<()> {
    let out = cfg.out()?;
    let frames = clip_frames(frames_dir)?;
    let clips = segment_clips(&frames);
    let mut dirs = Vec::new();
    for (n, clip) in clips.iter().enumerate() {
        let dir = format!("{n:04}");
        let root = out.join(&dir);
        framedir::write_frames(&root.join("source"), clip.source, &cfg.pipeline.intrinsics)?;
        framedir::write_frames(&root.join("target"), clip.target, &cfg.pipeline.intrinsics)?;
        write_json(
            &root.join("meta.json"),
            &json!({
                "start": clip.start,
                "transition": clip.transition,
                "source_frames": indices(clip.source),
                "target_frames": indices(clip.target),
            }),
        )?;
        dirs.push(dir);
    }
    let dropped = frames.len() - clips.len() * geomem::pipeline::CLIP_LENGTH;
    eprintln!("segment: {} clips, {dropped} trailing frames dropped", clips.len());
    finish(out, "segment", cfg, json!({"clips": dirs, "dropped_frames": dropped}))
}

pub fn build_pairs(cfg: &RunConfig, frames_dir: &Path) -> Result<()> {
    let out = cfg.out()?;
    let p = &cfg.pipeline;
    let frames = clip_frames(frames_dir)?;
    let clips = segment_clips(&frames);
    let mut dirs = Vec::new();
    for (n, clip) in clips.iter().enumerate() {
        let pair = build_pair(clip, &p.fusion, p.voxel_size, p.splat_radius)?;
        let dir = format!("{n:04}");
        let root = out.join(&dir);
        let mut reveal = Vec::new();
        for (view, target) in pair.conditions.iter().zip(&pair.targets) {
            let file = name(target.index, "ppm");
            io::write_ppm(&root.join("condition").join(&file), &view.image)?;
            io::write_mask_ppm(&root.join("mask").join(&file), view.width(), view.height(), &view.mask)?;
            io::write_ppm(&root.join("target").join(&file), &target.image)?;
            reveal.push(reveal_fraction(view));
        }
        write_json(
            &root.join("meta.json"),
            &json!({
                "start": clip.start,
                "transition": clip.transition,
                "source_frames": indices(clip.source),
                "target_frames": indices(clip.target),
                "target_poses": pair.targets.iter().map(|f| PoseRecord::from_pose(f.index, &f.pose)).collect::<Vec<_>>(),
                "points": pair.points.len(),
                "reveal_fractions": reveal,
            }),
        )?;
        dirs.push(dir);
    }
    eprintln!("build-pairs: {} pairs", dirs.len());
    finish(out, "build-pairs", cfg, json!({"pairs": dirs}))
}

fn report_paths(cfg: &RunConfig) -> Result<(PathBuf, PathBuf)> {
    let out = cfg.out()?.to_path_buf();
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    let config = out.with_file_name(format!("{stem}.config.json"));
    Ok((out, config))
}

pub fn eval_recall(cfg: &RunConfig, run_dir: &Path) -> Result<()> {
    let (out, config) = report_paths(cfg)?;
    let mut path_file = run_dir.join(PATH);
    if !path_file.exists() {
        path_file = run_dir.join(framedir::TRAJECTORY);
    }
    let path = io::read_trajectory(&path_file)?;
    let poses: Vec<_> = path.iter().map(|(_, p)| *p).collect();
    let mut samples = Vec::new();
    for (position, (index, _)) in path.iter().enumerate() {
        let file = run_dir.join("frames").join(name(*index, "ppm"));
        if !file.exists() {
            continue;
        }
        samples.push(RecallSample {
            position,
            image: io::read_ppm(&file)?,
            static_mask: framedir::read_mask(run_dir, "masks", *index)?,
            condition_mask: framedir::read_mask(run_dir, "condition_masks", *index)?,
        });
    }
    let report = view_recall_eval(&poses, &samples)?;
    std::fs::create_dir_all(out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")))?;
    std::fs::write(&out, report.to_json()? + "\n")?;
    std::fs::write(out.with_extension("csv"), report.to_csv())?;
    std::fs::write(config, cfg.to_json()?)?;
    let mean = |a: Option<geomem::eval::Aggregate>| a.map_or("n/a".to_string(), |a| format!("{:.3}", a.mean));
    eprintln!(
        "eval-recall: {} pairs, mean PSNR {}, masked {}",
        report.pair_count,
        mean(report.psnr),
        mean(report.masked_psnr)
    );
    Ok(())
}

pub fn eval_suppression(cfg: &RunConfig, frames_dir: &Path, fused_dir: &Path) -> Result<()> {
    let (out, config) = report_paths(cfg)?;
    let scene_file = frames_dir.join(SCENE);
    let text = std::fs::read_to_string(&scene_file)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", scene_file.display())))?;
    let scene: SyntheticScene =
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", scene_file.display())))?;
    scene.validate()?;
    let trajectory = io::read_trajectory(&frames_dir.join(framedir::TRAJECTORY))?;
    let first = trajectory.iter().map(|(i, _)| *i).min().ok_or_else(|| missing("a non-empty trajectory"))?;
    let last = trajectory.iter().map(|(i, _)| *i).max().unwrap_or(first);
    let volume = TsdfVolume::read_checkpoint(&fused_dir.join(TSDF))?;
    let points = io::read_ply(&fused_dir.join(POINTS))?;
    let report = suppression_metrics(&points, &scene, first..last + 1, &volume, &cfg.pipeline.fusion);
    let mut doc = BTreeMap::new();
    doc.insert("frames", json!([first, last]));
    doc.insert("report", serde_json::to_value(&report)?);
    write_json(&out, &doc)?;
    std::fs::write(config, cfg.to_json()?)?;
    eprintln!(
        "eval-suppression: leak {:.4}, recall {:.4}",
        report.dynamic_leak_rate, report.static_recall
    );
    Ok(())
}
