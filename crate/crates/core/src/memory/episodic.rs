use nalgebra::Vector3;

use crate::camera::{backproject, project, CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};
use crate::types::Frame;

pub const DEFAULT_REVEAL_THRESHOLD: f64 = 0.3;
pub const DEFAULT_EPISODIC_CAPACITY: usize = 64;

/// Query rays per image side used to score view overlap.
const OVERLAP_GRID: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodicSlot {
    pub frame: Frame,
    pub reveal_score: f64,
    pub step_index: i64,
}

/// Keyframes whose rendering of the spatial memory left more than
/// `threshold` of the image uncovered. When full, the least revealing slot
/// (oldest on ties) is evicted.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodicMemory {
    slots: Vec<EpisodicSlot>,
    threshold: f64,
    capacity: usize,
}

impl EpisodicMemory {
    /// `capacity = usize::MAX` keeps every accepted frame.
    pub fn new(threshold: f64, capacity: usize) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::invalid(format!("reveal threshold must be in (0, 1), got {threshold}")));
        }
        if capacity == 0 {
            return Err(Error::invalid("episodic capacity must be at least 1"));
        }
        Ok(Self {
            slots: Vec::new(),
            threshold,
            capacity,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn slots(&self) -> &[EpisodicSlot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Offers a frame with its reveal fraction. Returns whether it was
    /// accepted (`reveal > threshold`); an accepted frame may be evicted
    /// immediately if it is the least revealing slot of a full bank.
    pub fn consider(&mut self, frame: &Frame, reveal: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&reveal) {
            return Err(Error::invalid(format!("reveal fraction {reveal} outside [0, 1]")));
        }
        if !(reveal > self.threshold) {
            return Ok(false);
        }
        let slot = EpisodicSlot {
            frame: frame.clone(),
            reveal_score: reveal,
            step_index: frame.index,
        };
        let at = self.slots.partition_point(|s| s.step_index <= slot.step_index);
        self.slots.insert(at, slot);
        if self.slots.len() > self.capacity {
            let victim = self
                .slots
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    a.reveal_score
                        .total_cmp(&b.reveal_score)
                        .then(a.step_index.cmp(&b.step_index))
                })
                .map(|(i, _)| i)
                .expect("bank is non-empty");
            self.slots.remove(victim);
        }
        Ok(true)
    }

    /// Up to `n` slot frames ranked by how much of the query view they see
    /// (descending), newest first on ties.
    pub fn retrieve(&self, pose: &CameraPose, intr: &CameraIntrinsics, n: usize) -> Result<Vec<&Frame>> {
        if n == 0 {
            return Err(Error::invalid("retrieval count must be at least 1"));
        }
        let probes = overlap_probes(pose, intr);
        let mut scored: Vec<(f64, i64, &Frame)> = self
            .slots
            .iter()
            .map(|s| (overlap_score(&probes, &s.frame), s.step_index, &s.frame))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
        Ok(scored.into_iter().take(n).map(|(_, _, f)| f).collect())
    }
}

/// World points one unit of depth along an 8 x 8 grid of query rays.
fn overlap_probes(pose: &CameraPose, intr: &CameraIntrinsics) -> Vec<Vector3<f64>> {
    let mut probes = Vec::with_capacity(OVERLAP_GRID * OVERLAP_GRID);
    for gy in 0..OVERLAP_GRID {
        for gx in 0..OVERLAP_GRID {
            let u = (gx as f64 + 0.5) * intr.width as f64 / OVERLAP_GRID as f64 - 0.5;
            let v = (gy as f64 + 0.5) * intr.height as f64 / OVERLAP_GRID as f64 - 0.5;
            let cam = backproject(u, v, 1.0, intr).expect("unit depth is positive");
            probes.push(pose.cam_to_world(&cam));
        }
    }
    probes
}

/// Fraction of probe points that land inside `frame`'s image in front of its camera.
pub(crate) fn overlap_score(probes: &[Vector3<f64>], frame: &Frame) -> f64 {
    let hits = probes
        .iter()
        .filter(|p| project(&frame.pose.world_to_cam(p), &frame.intrinsics).is_some())
        .count();
    hits as f64 / probes.len() as f64
}
