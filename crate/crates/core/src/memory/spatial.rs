use std::collections::HashMap;

use nalgebra::Vector3;

use crate::camera::RigidTransform;
use crate::error::{Error, Result};
use crate::types::PointCloud;

/// Integer deduplication cell `floor(p / cell_size)`.
pub type CellKey = [i64; 3];

/// Fused static point cloud in a single world frame, holding at most one
/// point per deduplication cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMemory {
    cloud: PointCloud,
    merge_voxel: f64,
    cells: HashMap<CellKey, usize>,
}

impl SpatialMemory {
    pub fn new(merge_voxel: f64) -> Result<Self> {
        if !(merge_voxel > 0.0 && merge_voxel.is_finite()) {
            return Err(Error::invalid(format!("merge voxel must be positive, got {merge_voxel}")));
        }
        Ok(Self {
            cloud: PointCloud::default(),
            merge_voxel,
            cells: HashMap::new(),
        })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn merge_voxel(&self) -> f64 {
        self.merge_voxel
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn cell_of(&self, p: &Vector3<f64>) -> CellKey {
        let s = self.merge_voxel;
        [(p.x / s).floor() as i64, (p.y / s).floor() as i64, (p.z / s).floor() as i64]
    }

    /// Index of the point stored in `cell`, if any.
    pub fn point_in_cell(&self, cell: &CellKey) -> Option<usize> {
        self.cells.get(cell).copied()
    }

    /// Transforms `new_points` by `alignment` and inserts them in order.
    /// An occupied cell is overwritten only by a strictly more confident point.
    pub fn merge(&mut self, new_points: &PointCloud, alignment: &RigidTransform) -> Result<()> {
        alignment.validate()?;
        for i in 0..new_points.len() {
            let p = alignment.cam_to_world(&new_points.positions()[i]);
            let color = new_points.colors()[i];
            let conf = new_points.confidences()[i];
            let key = self.cell_of(&p);
            match self.cells.get(&key) {
                Some(&slot) => {
                    if conf > self.cloud.confidences()[slot] {
                        self.cloud.set(slot, p, color, conf);
                    }
                }
                None => {
                    self.cells.insert(key, self.cloud.len());
                    self.cloud.push(p, color, conf);
                }
            }
        }
        Ok(())
    }

    /// Nearest stored point within `max_dist` of `p`, searching cell shells
    /// outward from `p`'s cell.
    pub fn nearest(&self, p: &Vector3<f64>, max_dist: f64) -> Option<(usize, f64)> {
        if self.cloud.is_empty() {
            return None;
        }
        let center = self.cell_of(p);
        let max_shell = (max_dist / self.merge_voxel).ceil() as i64 + 1;
        let mut best: Option<(usize, f64)> = None;
        for shell in 0..=max_shell {
            // every point in shell `s` is at least (s - 1) cells away
            if let Some((_, d)) = best {
                if d <= (shell - 1).max(0) as f64 * self.merge_voxel {
                    break;
                }
            }
            for dx in -shell..=shell {
                for dy in -shell..=shell {
                    for dz in -shell..=shell {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != shell {
                            continue;
                        }
                        let key = [center[0] + dx, center[1] + dy, center[2] + dz];
                        if let Some(&idx) = self.cells.get(&key) {
                            let d = (self.cloud.positions()[idx] - p).norm();
                            if d <= max_dist && best.map_or(true, |(bi, bd)| d < bd || (d == bd && idx < bi)) {
                                best = Some((idx, d));
                            }
                        }
                    }
                }
            }
        }
        best
    }
}
