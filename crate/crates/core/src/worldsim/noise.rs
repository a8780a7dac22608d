//! Seeded corruption of oracle frames, emulating generation and
//! reconstruction error.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::camera::CameraPose;
use crate::error::{Error, Result};
use crate::types::{DepthMap, Frame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Per-channel Gaussian std added to RGB.
    pub rgb_sigma: f64,
    /// Relative std of multiplicative depth noise.
    pub depth_sigma_rel: f64,
    /// Per-axis rotation jitter std in degrees.
    pub pose_rot_deg: f64,
    /// Per-axis translation jitter std in meters.
    pub pose_trans_m: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            rgb_sigma: 0.0,
            depth_sigma_rel: 0.0,
            pose_rot_deg: 0.0,
            pose_trans_m: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy)]
enum Stream {
    Rgb = 1,
    Depth = 2,
    Pose = 3,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rgb_sigma", self.rgb_sigma),
            ("depth_sigma_rel", self.depth_sigma_rel),
            ("pose_rot_deg", self.pose_rot_deg),
            ("pose_trans_m", self.pose_trans_m),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("noise {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.rgb_sigma == 0.0 && self.depth_sigma_rel == 0.0 && self.pose_rot_deg == 0.0 && self.pose_trans_m == 0.0
    }

    /// Independent generator per (seed, frame, component).
    fn rng(&self, t: i64, stream: Stream) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix(splitmix(self.seed) ^ splitmix(t as u64) ^ stream as u64))
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Applies the noise model to a frame. Colors are clamped to `[0, 1]`;
/// invalid depths stay invalid. A zero model returns the frame unchanged.
pub fn perturb_frame(frame: &Frame, noise: &NoiseModel, t: i64) -> Frame {
    let mut out = frame.clone();
    if noise.rgb_sigma > 0.0 {
        let mut rng = noise.rng(t, Stream::Rgb);
        for px in out.image.pixels_mut() {
            for c in px.iter_mut() {
                *c = (*c as f64 + noise.rgb_sigma * gauss(&mut rng)).clamp(0.0, 1.0) as f32;
            }
        }
    }
    if noise.depth_sigma_rel > 0.0 {
        let mut rng = noise.rng(t, Stream::Depth);
        for d in out.depth.depths_mut() {
            let n = gauss(&mut rng);
            if DepthMap::is_valid_depth(*d) {
                let scaled = (*d as f64 * (1.0 + noise.depth_sigma_rel * n)) as f32;
                *d = if DepthMap::is_valid_depth(scaled) { scaled } else { 0.0 };
            }
        }
    }
    if noise.pose_rot_deg > 0.0 || noise.pose_trans_m > 0.0 {
        let mut rng = noise.rng(t, Stream::Pose);
        let rot = Vector3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * noise.pose_rot_deg.to_radians();
        let trans = Vector3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * noise.pose_trans_m;
        let angle = rot.norm();
        let jitter = CameraPose::from_axis_angle(rot, angle, trans);
        out.pose = CameraPose {
            rotation: jitter.rotation * frame.pose.rotation,
            translation: frame.pose.translation + trans,
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraIntrinsics;
    use crate::types::Image;

    fn frame(w: u32, h: u32) -> Frame {
        let intr = CameraIntrinsics::new(100.0, 100.0, (w / 2) as f64, (h / 2) as f64, w, h).unwrap();
        let mut depths = vec![2.0f32; (w * h) as usize];
        depths[0] = 0.0;
        Frame::new(3, Image::filled(w, h, [0.5; 3]), DepthMap::new(w, h, depths).unwrap(), CameraPose::identity(), intr).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let f = frame(8, 6);
        assert_eq!(perturb_frame(&f, &NoiseModel::default(), 17), f);
    }

    #[test]
    fn seeded_determinism_and_independence() {
        let f = frame(16, 12);
        let noise = NoiseModel {
            rgb_sigma: 0.05,
            depth_sigma_rel: 0.01,
            pose_rot_deg: 0.5,
            pose_trans_m: 0.01,
            seed: 9,
        };
        let a = perturb_frame(&f, &noise, 4);
        assert_eq!(a, perturb_frame(&f, &noise, 4));
        assert_ne!(a, perturb_frame(&f, &noise, 5));
        a.pose.validate().unwrap();
        assert_eq!(a.depth.depths()[0], 0.0);
        // the depth stream does not depend on the rgb setting
        let rgb_only = NoiseModel { rgb_sigma: 0.2, ..noise.clone() };
        assert_eq!(perturb_frame(&f, &rgb_only, 4).depth, a.depth);
    }

    #[test]
    fn rgb_noise_has_requested_std() {
        let f = frame(1000, 334);
        let noise = NoiseModel {
            rgb_sigma: 0.05,
            seed: 1,
            ..Default::default()
        };
        let out = perturb_frame(&f, &noise, 0);
        let vals: Vec<f64> = out.image.pixels().iter().flat_map(|p| p.iter().map(|&c| c as f64 - 0.5)).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(n >= 1e6);
        assert!((std - 0.05).abs() < 0.02 * 0.05, "std {std}");
    }

    #[test]
    fn rejects_negative_std() {
        let noise = NoiseModel {
            depth_sigma_rel: -0.1,
            ..Default::default()
        };
        assert!(noise.validate().is_err());
    }
}
