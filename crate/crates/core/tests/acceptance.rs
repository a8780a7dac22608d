//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use geomem::eval::{psnr, samples_from_run, ssim, suppression_metrics, view_recall_eval};
use geomem::memory::{EpisodicMemory, SpatialMemory};
use geomem::pipeline::{build_pair, fuse_frames, run_autoregressive, segment_clips, PipelineConfig, SceneSpec};
use geomem::render::{render_points, reveal_fraction};
use geomem::tsdf::{voxel_sdf, FusionConfig, GridSpec, TsdfVolume};
use geomem::worldsim::{build_scene, make_trajectory, render_frame, MotionPath, NoiseModel, Preset};
use geomem::{CameraIntrinsics, CameraPose, DepthMap, Frame, Image};
use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and budgets.
const C1_PERMUTATION_TOL: f64 = 1e-5;
const C1_CLOSED_FORM_TOL: f64 = 1e-6;
const C1_BUDGET: Duration = Duration::from_secs(10);
const C2_MAX_LEAK: f64 = 0.02;
const C2_MIN_RECALL: f64 = 0.90;
const C2_BUDGET: Duration = Duration::from_secs(60);
const C3_MAX_DIM: usize = 1200;
const C4_BUDGET: Duration = Duration::from_secs(300);
const C4_SEEDS: u64 = 5;
const C5_MIN_ERASURE: f64 = 0.98;
const C7_TOL: f64 = 1e-6;
const C7_PAIRS: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("fusion is order independent and matches the weighted mean", criterion_1),
        ("variance filter suppresses the mover and keeps the room", criterion_2),
        ("grid sizing caps the largest axis at 1200 voxels", criterion_3),
        ("forward-reverse recall: exact when static, memory beats ablation", criterion_4),
        ("clip segmentation and dynamic erasure in paired samples", criterion_5),
        ("episodic replay and reveal monotonicity", criterion_6),
        ("PSNR and SSIM match brute-force references", criterion_7),
        ("run output is identical across thread counts", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name} [{}]",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn random_frame(rng: &mut ChaCha8Rng, index: i64) -> Frame {
    let intr = CameraIntrinsics::from_fov(40, 30, 70.0).unwrap();
    let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)).normalize();
    let eye = dir * rng.random_range(2.0..3.0);
    let target = Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let pose = CameraPose::look_at(eye, target, Vector3::y()).unwrap();
    let n = intr.pixel_count();
    let base = (eye - target).norm();
    let depths = (0..n)
        .map(|_| if rng.random_bool(0.05) { 0.0 } else { (base + rng.random_range(-0.6..0.4)) as f32 })
        .collect();
    let pixels = (0..n).map(|_| [rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()]).collect();
    Frame::new(
        index,
        Image::new(intr.width, intr.height, pixels).unwrap(),
        DepthMap::new(intr.width, intr.height, depths).unwrap(),
        pose,
        intr,
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let frames: Vec<Frame> = (0..20).map(|i| random_frame(&mut rng, i)).collect();
    let cfg = FusionConfig::default();
    let lo = Vector3::repeat(-1.0);
    let hi = Vector3::repeat(1.0);
    let fuse = |order: &[usize]| {
        let mut vol = TsdfVolume::new(lo, hi, 2.0 / 64.0, &cfg).unwrap();
        for &i in order {
            vol.integrate_frame(&frames[i], &cfg).unwrap();
        }
        vol
    };
    let identity: Vec<usize> = (0..20).collect();
    let reference = fuse(&identity);
    if reference.dims() != [64; 3] {
        return outcome(false, format!("volume dims {:?}", reference.dims()));
    }
    let mut orders = vec![identity.iter().rev().copied().collect::<Vec<_>>()];
    for _ in 0..3 {
        let mut o = identity.clone();
        o.shuffle(&mut rng);
        orders.push(o);
    }
    let mut worst_perm = 0.0f64;
    for o in &orders {
        let v = fuse(o);
        for (a, b) in reference.tsdf().iter().zip(v.tsdf()).chain(reference.weights().iter().zip(v.weights())) {
            worst_perm = worst_perm.max((a - b).abs() as f64);
        }
    }

    let grid = *reference.grid();
    let observed: Vec<usize> = (0..grid.voxel_count()).filter(|&i| reference.weights()[i] > 0.0).collect();
    let mut worst_spot = 0.0f64;
    let mut weight_mismatch = 0;
    for &i in observed.iter().step_by((observed.len() / 500).max(1)) {
        let [x, y, z] = grid.coords(i);
        let c = grid.voxel_center(x, y, z);
        let sdfs: Vec<f64> = frames.iter().filter_map(|f| voxel_sdf(&c, f, reference.truncation())).collect();
        if sdfs.len() as f32 != reference.weights()[i] {
            weight_mismatch += 1;
        }
        let mean = sdfs.iter().sum::<f64>() / sdfs.len() as f64;
        worst_spot = worst_spot.max((mean - reference.tsdf()[i] as f64).abs());
    }
    let elapsed = start.elapsed();
    let pass =
        worst_perm <= C1_PERMUTATION_TOL && worst_spot <= C1_CLOSED_FORM_TOL && weight_mismatch == 0 && elapsed < C1_BUDGET;
    outcome(
        pass,
        format!(
            "max permutation diff {worst_perm:.2e} (tol {C1_PERMUTATION_TOL:.0e}), max closed-form diff {worst_spot:.2e} (tol {C1_CLOSED_FORM_TOL:.0e}), weight mismatches {weight_mismatch}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cfg = PipelineConfig::default();
    let scene = build_scene(0, Preset::RoomWithMover);
    let poses = make_trajectory(&cfg.trajectory, 60).unwrap();
    let frames: Vec<Frame> = poses
        .iter()
        .enumerate()
        .map(|(i, p)| render_frame(&scene, p, &cfg.intrinsics, i as i64).frame)
        .collect();
    let refs: Vec<&Frame> = frames.iter().collect();
    let score = |variance_filter: bool| {
        let fusion = FusionConfig {
            variance_filter,
            ..Default::default()
        };
        let (vol, pts) = fuse_frames(&refs, cfg.voxel_size, &fusion).unwrap().unwrap();
        suppression_metrics(&pts, &scene, 0..60, &vol, &fusion)
    };
    let on = score(true);
    let off = score(false);
    let elapsed = start.elapsed();
    let pass = on.dynamic_leak_rate < C2_MAX_LEAK
        && on.static_recall > C2_MIN_RECALL
        && off.dynamic_leak_rate > on.dynamic_leak_rate
        && elapsed < C2_BUDGET;
    outcome(
        pass,
        format!(
            "filter on: leak {:.4} recall {:.4}; filter off: leak {:.5} ({} points); {:.1}s",
            on.dynamic_leak_rate,
            on.static_recall,
            off.dynamic_leak_rate,
            off.leaked_points,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let g = GridSpec::fit(Vector3::zeros(), Vector3::repeat(6.0), 0.004, C3_MAX_DIM).unwrap();
    let exact = (g.voxel_size - 0.005).abs() < 1e-12 && g.dims.iter().max() == Some(&1200);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0;
    for _ in 0..2000 {
        let lo = Vector3::from_fn(|_, _| rng.random_range(-50.0..50.0));
        let ext = Vector3::from_fn(|_, _| 10f64.powf(rng.random_range(-2.0..2.0)));
        let voxel = 10f64.powf(rng.random_range(-4.0..0.0));
        let g = GridSpec::fit(lo, lo + ext, voxel, C3_MAX_DIM).unwrap();
        worst = worst.max(*g.dims.iter().max().unwrap());
    }
    outcome(
        exact && worst <= C3_MAX_DIM,
        format!("6 m at 0.004 -> voxel {} dims {:?}; largest dim over 2000 random boxes {worst}", g.voxel_size, g.dims),
    )
}

fn recall_config(seed: u64, static_only: bool, noise: NoiseModel, spatial_guidance: bool) -> PipelineConfig {
    PipelineConfig {
        chunk_length: 25,
        scene: SceneSpec::Preset {
            preset: Preset::RoomWithMover,
            seed,
            static_only,
        },
        noise,
        spatial_guidance,
        ..Default::default()
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let clean = recall_config(0, true, NoiseModel::default(), true);
    let out = run_autoregressive(&clean, 4).unwrap();
    let report = view_recall_eval(&out.poses, &samples_from_run(&out)).unwrap();
    let exact = report.pair_count > 0 && report.pairs.iter().all(|p| p.psnr == 100.0 && p.ssim == 1.0);
    let mut details = vec![format!("static zero-noise: {} pairs exact={exact}", report.pair_count)];

    let mut wins = 0;
    for seed in 0..C4_SEEDS {
        let noise = NoiseModel {
            rgb_sigma: 0.02,
            depth_sigma_rel: 0.01,
            seed,
            ..Default::default()
        };
        let score = |guidance: bool| {
            let out = run_autoregressive(&recall_config(seed, false, noise.clone(), guidance), 4).unwrap();
            let r = view_recall_eval(&out.poses, &samples_from_run(&out)).unwrap();
            r.masked_psnr.map(|a| a.mean).unwrap_or(f64::NAN)
        };
        let (with, without) = (score(true), score(false));
        if with > without {
            wins += 1;
        }
        details.push(format!("seed {seed}: {with:.2} vs {without:.2} dB"));
    }
    let elapsed = start.elapsed();
    details.push(format!("{:.1}s", elapsed.as_secs_f64()));
    outcome(exact && wins == C4_SEEDS && elapsed < C4_BUDGET, details.join("; "))
}

fn criterion_5() -> Outcome {
    // a clip on a retraced path, so target k sits at source 48 - k, with a
    // sphere that sweeps across the view during the source frames
    let cfg = PipelineConfig::default();
    let mut scene = build_scene(0, Preset::RoomWithMover);
    scene.frame_count = 97;
    scene.dynamics[0].path = MotionPath::Sinusoid {
        center: [-0.2, 1.4, 0.2],
        amplitude: [1.5, 0.0, 0.0],
        period: 96.0,
        phase: [-std::f64::consts::FRAC_PI_2, 0.0, 0.0],
    };
    if let Err(e) = scene.validate() {
        return outcome(false, format!("clip scene invalid: {e}"));
    }
    let poses = make_trajectory(&cfg.trajectory, 98).unwrap();
    let labeled: Vec<_> = poses[..97]
        .iter()
        .enumerate()
        .map(|(i, p)| render_frame(&scene, p, &cfg.intrinsics, i as i64))
        .collect();
    let frames: Vec<Frame> = labeled.iter().map(|l| l.frame.clone()).collect();

    let clips = segment_clips(&frames);
    let shape_ok = clips.len() == 1
        && clips[0].source.len() == 49
        && clips[0].target.len() == 48
        && clips[0].transition == 48
        && segment_clips(&vec![frames[0].clone(); 200]).len() == 2;

    let pair = build_pair(&clips[0], &cfg.fusion, cfg.voxel_size, cfg.splat_radius).unwrap();
    let margin = cfg.voxel_size;
    let (mut object_pixels, mut shown) = (0usize, 0usize);
    for (k, view) in pair.conditions.iter().enumerate() {
        let source = 48 - k;
        let truth = &labeled[source];
        for (p, &is_static) in truth.static_mask.iter().enumerate() {
            if is_static {
                continue;
            }
            object_pixels += 1;
            if !view.mask[p] {
                continue;
            }
            let intr = &cfg.intrinsics;
            let (u, v) = ((p % intr.width as usize) as f64, (p / intr.width as usize) as f64);
            let cam = geomem::backproject(u, v, view.depth.depths()[p] as f64, intr).unwrap();
            let world = pair.targets[k].pose.cam_to_world(&cam);
            if scene.in_dynamic_swept_volume(&world, 0..49, margin) {
                shown += 1;
            }
        }
    }
    let erased = 1.0 - shown as f64 / object_pixels.max(1) as f64;
    outcome(
        shape_ok && object_pixels > 0 && erased >= C5_MIN_ERASURE,
        format!("clip shapes ok={shape_ok}; object pixels {object_pixels}, erased {erased:.4} (min {C5_MIN_ERASURE})"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let template = random_frame(&mut rng, 0);
    let mut mismatches = 0;
    for trial in 0..50 {
        let capacity = rng.random_range(1..12);
        let theta = rng.random_range(0.05..0.95);
        let mut bank = EpisodicMemory::new(theta, capacity).unwrap();
        // reference model: plain list of (reveal, index)
        let mut model: Vec<(f64, i64)> = Vec::new();
        for i in 0..rng.random_range(1..120) {
            // coarse values force ties
            let reveal = (rng.random_range(0..=20) as f64) / 20.0;
            let frame = Frame {
                index: i,
                ..template.clone()
            };
            let accepted = bank.consider(&frame, reveal).unwrap();
            let expect = reveal > theta;
            if expect {
                model.push((reveal, i));
                if model.len() > capacity {
                    let victim = (0..model.len())
                        .min_by(|&a, &b| model[a].0.total_cmp(&model[b].0).then(model[a].1.cmp(&model[b].1)))
                        .unwrap();
                    model.remove(victim);
                }
            }
            let mut have: Vec<(f64, i64)> = bank.slots().iter().map(|s| (s.reveal_score, s.frame.index)).collect();
            let mut want = model.clone();
            have.sort_by_key(|s| s.1);
            want.sort_by_key(|s| s.1);
            if accepted != expect || have != want {
                mismatches += 1;
                eprintln!("episodic mismatch in trial {trial} at frame {i}");
            }
        }
    }

    // grow the spatial memory chunk by chunk and re-render fixed poses
    let cfg = PipelineConfig::default();
    let scene = build_scene(0, Preset::RoomWithMover).static_only();
    let poses = make_trajectory(&cfg.trajectory, 48).unwrap();
    let frames: Vec<Frame> = poses
        .iter()
        .enumerate()
        .map(|(i, p)| render_frame(&scene, p, &cfg.intrinsics, i as i64).frame)
        .collect();
    let probes: Vec<&CameraPose> = poses.iter().step_by(6).collect();
    let mut memory = SpatialMemory::new(cfg.voxel_size).unwrap();
    let mut last = vec![1.0; probes.len()];
    let mut increases = 0;
    for chunk in frames.chunks(8) {
        let refs: Vec<&Frame> = chunk.iter().collect();
        if let Some((_, pts)) = fuse_frames(&refs, cfg.voxel_size, &cfg.fusion).unwrap() {
            memory.merge(&pts, &CameraPose::identity()).unwrap();
        }
        for (j, pose) in probes.iter().enumerate() {
            let r = reveal_fraction(&render_points(memory.cloud(), &cfg.intrinsics, pose, cfg.splat_radius));
            if r > last[j] {
                increases += 1;
            }
            last[j] = r;
        }
    }
    outcome(
        mismatches == 0 && increases == 0,
        format!("episodic mismatches {mismatches} over 50 streams; reveal increases {increases}; final reveal {last:.3?}"),
    )
}

fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Image {
    Image::new(w, h, (0..w * h).map(|_| [rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()]).collect()).unwrap()
}

fn reference_psnr(a: &Image, b: &Image) -> f64 {
    let mut sse = 0.0;
    let mut n = 0.0;
    for (p, q) in a.pixels().iter().zip(b.pixels()) {
        for c in 0..3 {
            let d = p[c] as f64 - q[c] as f64;
            sse += d * d;
            n += 1.0;
        }
    }
    let mse = sse / n;
    if mse == 0.0 {
        100.0
    } else {
        (10.0 * (1.0 / mse).log10()).min(100.0)
    }
}

fn reference_ssim(a: &Image, b: &Image) -> f64 {
    let (w, h) = (a.width() as usize, a.height() as usize);
    let luma = |img: &Image| -> Vec<f64> {
        img.pixels()
            .iter()
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    };
    let (x, y) = (luma(a), luma(b));
    let mut kernel = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in kernel.iter_mut().enumerate() {
        for (j, k) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *k = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *k;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut sum = 0.0;
    let mut count = 0.0;
    for r0 in 0..=h - 11 {
        for q0 in 0..=w - 11 {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let k = kernel[i][j] / total;
                    let (u, v) = (x[(r0 + i) * w + q0 + j], y[(r0 + i) * w + q0 + j]);
                    mx += k * u;
                    my += k * v;
                    xx += k * u * u;
                    yy += k * v * v;
                    xy += k * u * v;
                }
            }
            let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
            sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1.0;
        }
    }
    sum / count
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_psnr, mut worst_ssim) = (0.0f64, 0.0f64);
    for _ in 0..C7_PAIRS {
        let (w, h) = (rng.random_range(11..40), rng.random_range(11..40));
        let a = random_image(&mut rng, w, h);
        // correlated second image so SSIM spans a useful range
        let mix = rng.random_range(0.0..1.0f32);
        let noise = random_image(&mut rng, w, h);
        let b = Image::new(
            w,
            h,
            a.pixels()
                .iter()
                .zip(noise.pixels())
                .map(|(p, n)| [0, 1, 2].map(|c| (1.0 - mix) * p[c] + mix * n[c]))
                .collect(),
        )
        .unwrap();
        worst_psnr = worst_psnr.max((psnr(&a, &b, None).unwrap() - reference_psnr(&a, &b)).abs());
        worst_ssim = worst_ssim.max((ssim(&a, &b).unwrap() - reference_ssim(&a, &b)).abs());
    }
    outcome(
        worst_psnr <= C7_TOL && worst_ssim <= C7_TOL,
        format!("{C7_PAIRS} pairs: max PSNR diff {worst_psnr:.2e}, max SSIM diff {worst_ssim:.2e} (tol {C7_TOL:.0e})"),
    )
}

/// The CLI binary from the same build, or a private build when absent.
fn cli_binary() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let bin = profile_dir.join(format!("geomem{}", std::env::consts::EXE_SUFFIX));
    if bin.exists() {
        return bin;
    }
    let target = profile_dir.join("acceptance-cli");
    let status = Command::new(env!("CARGO"))
        .args(["build", "--quiet", "-p", "geomem-cli", "--target-dir"])
        .arg(&target)
        .status()
        .unwrap();
    assert!(status.success(), "building the CLI failed");
    target.join("debug").join(format!("geomem{}", std::env::consts::EXE_SUFFIX))
}

fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_8() -> Outcome {
    let bin = cli_binary();
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = tmp.path().join(format!("threads-{threads}"));
        let status = Command::new(&bin)
            .args(["run", "--preset", "room-with-mover", "--seed", "7", "--steps", "2", "--chunk", "13", "--context", "3"])
            .args(["--noise-rgb", "0.02", "--noise-depth", "0.01", "--threads", threads, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        tree_bytes(&out)
    };
    let (one, four) = (run("1"), run("4"));
    let has_manifest = one.iter().any(|(p, _)| p == Path::new("manifest.json"));
    let differing: Vec<_> = one
        .iter()
        .zip(&four)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.display().to_string())
        .collect();
    outcome(
        has_manifest && one.len() == four.len() && differing.is_empty(),
        format!("{} files compared, {} differ {:?}", one.len(), differing.len(), differing.iter().take(3).collect::<Vec<_>>()),
    )
}
