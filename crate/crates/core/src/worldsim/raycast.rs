use nalgebra::Vector3;
use rayon::prelude::*;

use super::scene::{SyntheticScene, SKY_COLOR};
use crate::camera::{CameraIntrinsics, CameraPose};
use crate::types::{DepthMap, Frame, Image};

/// A rendered frame plus its ground-truth static mask (true where the
/// nearest hit is static geometry or the sky).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub frame: Frame,
    pub static_mask: Vec<bool>,
}

/// Ray casts one pixel per ray through integer pixel centers. Depth is the
/// camera-frame z of the nearest hit; misses get the sky color, an invalid
/// depth and a static label.
pub fn render_frame(scene: &SyntheticScene, pose: &CameraPose, intr: &CameraIntrinsics, t: i64) -> LabeledFrame {
    let (w, h) = (intr.width as usize, intr.height as usize);
    let origin = pose.translation;
    let rows: Vec<Vec<(crate::types::Rgb, f32, bool)>> = (0..h)
        .into_par_iter()
        .map(|row| {
            (0..w)
                .map(|col| {
                    // camera-frame ray with unit z, so the hit parameter is the depth
                    let d_cam = Vector3::new((col as f64 - intr.cx) / intr.fx, (row as f64 - intr.cy) / intr.fy, 1.0);
                    let dir = pose.rotation * d_cam;
                    match scene.cast(&origin, &dir, t as f64) {
                        Some(hit) => (hit.color, hit.t as f32, hit.is_static),
                        None => (SKY_COLOR, 0.0, true),
                    }
                })
                .collect()
        })
        .collect();
    let mut pixels = Vec::with_capacity(w * h);
    let mut depths = Vec::with_capacity(w * h);
    let mut static_mask = Vec::with_capacity(w * h);
    for (c, d, s) in rows.into_iter().flatten() {
        pixels.push(c);
        depths.push(d);
        static_mask.push(s);
    }
    let frame = Frame {
        index: t,
        image: Image::new(intr.width, intr.height, pixels).expect("materials are validated to [0, 1]"),
        depth: DepthMap::new(intr.width, intr.height, depths).expect("sizes match"),
        pose: *pose,
        intrinsics: *intr,
    };
    LabeledFrame { frame, static_mask }
}
