//! Ground-truth scoring of dynamic-object removal in a fused volume.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::tsdf::{FusionConfig, TsdfVolume};
use crate::types::PointCloud;
use crate::worldsim::SyntheticScene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionReport {
    /// Share of extracted points inside the region swept by moving objects.
    pub dynamic_leak_rate: f64,
    /// Share of well-observed static-surface voxels that were extracted.
    pub static_recall: f64,
    pub extracted_points: usize,
    pub leaked_points: usize,
    pub surface_voxels: usize,
    pub recalled_voxels: usize,
}

/// Scores `extracted` (points from `volume`) against the analytic scene.
///
/// A point leaks when it lies within one voxel of any dynamic object at
/// any frame in `frames`. A voxel counts as static surface when its center
/// is within half a voxel of a static primitive, it lies outside the swept
/// region, and it accumulated at least `min_weight`.
pub fn suppression_metrics(
    extracted: &PointCloud,
    scene: &SyntheticScene,
    frames: Range<i64>,
    volume: &TsdfVolume,
    fusion: &FusionConfig,
) -> SuppressionReport {
    let voxel = volume.voxel_size();
    let leaked_points = extracted
        .positions()
        .iter()
        .filter(|p| scene.in_dynamic_swept_volume(p, frames.clone(), voxel))
        .count();
    let grid = volume.grid();
    let hit: HashSet<usize> = extracted
        .positions()
        .iter()
        .filter_map(|p| grid.locate(p))
        .map(|[x, y, z]| grid.index(x, y, z))
        .collect();

    let weights = volume.weights();
    let mut surface_voxels = 0;
    let mut recalled_voxels = 0;
    for (i, &w) in weights.iter().enumerate() {
        if (w as f64) < fusion.min_weight {
            continue;
        }
        let [x, y, z] = grid.coords(i);
        let c = grid.voxel_center(x, y, z);
        if scene.static_surface_distance(&c) > 0.5 * voxel || scene.in_dynamic_swept_volume(&c, frames.clone(), voxel) {
            continue;
        }
        surface_voxels += 1;
        if hit.contains(&i) {
            recalled_voxels += 1;
        }
    }

    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    SuppressionReport {
        dynamic_leak_rate: ratio(leaked_points, extracted.len()),
        static_recall: ratio(recalled_voxels, surface_voxels),
        extracted_points: extracted.len(),
        leaked_points,
        surface_voxels,
        recalled_voxels,
    }
}
