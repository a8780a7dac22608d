//! Camera trajectory generators. World up is +Y.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::CameraPose;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// Circle of `radius` around `target` at `height` above it, always
    /// looking at the target. Frames are spaced `arc_deg / n` apart.
    Orbit {
        target: [f64; 3],
        radius: f64,
        #[serde(default)]
        height: f64,
        #[serde(default)]
        start_deg: f64,
        #[serde(default = "full_circle")]
        arc_deg: f64,
    },
    /// Linear move from `start` to `end` while panning, then the exact same
    /// poses in reverse order.
    ForwardReverse {
        start: [f64; 3],
        end: [f64; 3],
        yaw_start_deg: f64,
        yaw_end_deg: f64,
        #[serde(default)]
        pitch_deg: f64,
    },
    /// Seeded Brownian motion reflected at the box walls.
    RandomWalk {
        start: [f64; 3],
        bounds_min: [f64; 3],
        bounds_max: [f64; 3],
        step_sigma: f64,
        yaw_sigma_deg: f64,
        seed: u64,
    },
}

fn full_circle() -> f64 {
    360.0
}

pub fn make_trajectory(spec: &TrajectorySpec, n_frames: usize) -> Result<Vec<CameraPose>> {
    if n_frames < 2 {
        return Err(Error::invalid(format!("trajectory needs at least 2 frames, got {n_frames}")));
    }
    match spec {
        TrajectorySpec::Orbit {
            target,
            radius,
            height,
            start_deg,
            arc_deg,
        } => {
            if !(*radius > 0.0) {
                return Err(Error::invalid(format!("orbit radius must be positive, got {radius}")));
            }
            let target = Vector3::from(*target);
            (0..n_frames)
                .map(|i| {
                    let a = (start_deg + arc_deg * i as f64 / n_frames as f64).to_radians();
                    let eye = target + Vector3::new(radius * a.cos(), *height, radius * a.sin());
                    CameraPose::look_at(eye, target, Vector3::y())
                })
                .collect()
        }
        TrajectorySpec::ForwardReverse {
            start,
            end,
            yaw_start_deg,
            yaw_end_deg,
            pitch_deg,
        } => {
            if n_frames % 2 != 0 {
                return Err(Error::invalid(format!("forward-reverse needs an even frame count, got {n_frames}")));
            }
            let half = n_frames / 2;
            let (start, end) = (Vector3::from(*start), Vector3::from(*end));
            let forward: Vec<CameraPose> = (0..half)
                .map(|i| {
                    let s = if half > 1 { i as f64 / (half - 1) as f64 } else { 0.0 };
                    let eye = start + (end - start) * s;
                    let yaw = yaw_start_deg + (yaw_end_deg - yaw_start_deg) * s;
                    CameraPose::from_yaw_pitch(eye, yaw, *pitch_deg)
                })
                .collect();
            let mut poses = forward.clone();
            poses.extend(forward.into_iter().rev());
            Ok(poses)
        }
        TrajectorySpec::RandomWalk {
            start,
            bounds_min,
            bounds_max,
            step_sigma,
            yaw_sigma_deg,
            seed,
        } => {
            let (lo, hi) = (Vector3::from(*bounds_min), Vector3::from(*bounds_max));
            let mut pos = Vector3::from(*start);
            if !(0..3).all(|k| lo[k] < hi[k] && pos[k] >= lo[k] && pos[k] <= hi[k]) {
                return Err(Error::invalid("random walk start must lie inside a non-empty box"));
            }
            let step = Normal::new(0.0, *step_sigma).map_err(|e| Error::invalid(format!("step_sigma: {e}")))?;
            let turn = Normal::new(0.0, *yaw_sigma_deg).map_err(|e| Error::invalid(format!("yaw_sigma_deg: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut yaw = 0.0;
            let mut poses = Vec::with_capacity(n_frames);
            for i in 0..n_frames {
                if i > 0 {
                    for k in 0..3 {
                        let mut x = pos[k] + step.sample(&mut rng);
                        // reflect until inside; the loop ends because the box is non-empty
                        while x < lo[k] || x > hi[k] {
                            x = if x < lo[k] { 2.0 * lo[k] - x } else { 2.0 * hi[k] - x };
                        }
                        pos[k] = x;
                    }
                    yaw += turn.sample(&mut rng);
                }
                poses.push(CameraPose::from_yaw_pitch(pos, yaw, 0.0));
            }
            Ok(poses)
        }
    }
}

/// True when pose `i` equals pose `n - 1 - i` bit for bit for every `i`.
pub fn is_palindrome(poses: &[CameraPose]) -> bool {
    let n = poses.len();
    (0..n / 2).all(|i| poses[i] == poses[n - 1 - i])
}
