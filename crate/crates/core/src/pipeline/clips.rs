//! Fixed-length clip segmentation and (static condition, target) pairs.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::fuse_frames;
use crate::error::Result;
use crate::render::{render_points, RenderedView};
use crate::tsdf::FusionConfig;
use crate::types::{Frame, PointCloud};

/// Frames per clip.
pub const CLIP_LENGTH: usize = 97;
/// Leading frames of a clip used as the source; the rest are the target.
pub const SOURCE_LENGTH: usize = 49;

/// One window of a longer sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clip<'a> {
    /// Position of the clip's first frame in the input sequence.
    pub start: usize,
    pub source: &'a [Frame],
    pub target: &'a [Frame],
    /// Clip-local index of the last source frame, which also opens the target.
    pub transition: usize,
}

/// Cuts `frames` into back-to-back clips; a remainder shorter than a clip is dropped.
pub fn segment_clips(frames: &[Frame]) -> Vec<Clip<'_>> {
    frames
        .chunks_exact(CLIP_LENGTH)
        .enumerate()
        .map(|(i, window)| {
            let (source, target) = window.split_at(SOURCE_LENGTH);
            Clip {
                start: i * CLIP_LENGTH,
                source,
                target,
                transition: SOURCE_LENGTH - 1,
            }
        })
        .collect()
}

/// Axis-aligned bounds of every valid back-projected depth sample.
pub fn chunk_bounds<'a>(frames: impl IntoIterator<Item = &'a Frame>) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    let mut any = false;
    for f in frames {
        for p in f.world_points() {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
            any = true;
        }
    }
    any.then_some((lo, hi))
}

/// Static condition renders for the target poses of a clip, built from the
/// source frames only, alongside the untouched target frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub conditions: Vec<RenderedView>,
    pub targets: Vec<Frame>,
    /// Static points extracted from the source frames.
    pub points: PointCloud,
}

pub fn build_pair(clip: &Clip<'_>, fusion: &FusionConfig, voxel_size: f64, splat_radius: u32) -> Result<PairedSample> {
    let sources: Vec<&Frame> = clip.source.iter().collect();
    let points = match fuse_frames(&sources, voxel_size, fusion)? {
        Some((_, pts)) => pts,
        None => PointCloud::default(),
    };
    let conditions = clip
        .target
        .par_iter()
        .map(|f| render_points(&points, &f.intrinsics, &f.pose, splat_radius))
        .collect();
    Ok(PairedSample {
        conditions,
        targets: clip.target.to_vec(),
        points,
    })
}
