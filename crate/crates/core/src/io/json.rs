//! JSON camera descriptions.
//!
//! A trajectory is an array of `{"index", "rotation" (9 floats, row-major),
//! "translation" (3 floats)}` objects; intrinsics are a single
//! `{"fx", "fy", "cx", "cy", "width", "height"}` object.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub index: i64,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl PoseRecord {
    pub fn from_pose(index: i64, pose: &CameraPose) -> Self {
        Self {
            index,
            rotation: pose.rotation_row_major(),
            translation: pose.translation.into(),
        }
    }

    pub fn to_pose(&self) -> Result<CameraPose> {
        CameraPose::from_row_major(self.rotation, self.translation)
    }
}

pub fn trajectory_to_json(poses: &[(i64, CameraPose)]) -> Result<String> {
    let records: Vec<_> = poses.iter().map(|(i, p)| PoseRecord::from_pose(*i, p)).collect();
    Ok(serde_json::to_string_pretty(&records)?)
}

pub fn trajectory_from_json(text: &str) -> Result<Vec<(i64, CameraPose)>> {
    let records: Vec<PoseRecord> = serde_json::from_str(text)?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.to_pose()
                .map(|p| (r.index, p))
                .map_err(|e| Error::invalid(format!("trajectory entry {i} (index {}): {e}", r.index)))
        })
        .collect()
}

pub fn write_trajectory(path: &Path, poses: &[(i64, CameraPose)]) -> Result<()> {
    super::write_bytes(path, trajectory_to_json(poses)?.as_bytes())
}

pub fn read_trajectory(path: &Path) -> Result<Vec<(i64, CameraPose)>> {
    let bytes = super::read_bytes(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::format("JSON", e.valid_up_to(), "not UTF-8"))?;
    trajectory_from_json(text)
}

pub fn intrinsics_from_json(text: &str) -> Result<CameraIntrinsics> {
    let intr: CameraIntrinsics = serde_json::from_str(text)?;
    intr.validate()?;
    Ok(intr)
}

pub fn write_intrinsics(path: &Path, intr: &CameraIntrinsics) -> Result<()> {
    super::write_bytes(path, serde_json::to_string_pretty(intr)?.as_bytes())
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let bytes = super::read_bytes(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::format("JSON", e.valid_up_to(), "not UTF-8"))?;
    intrinsics_from_json(text)
}
