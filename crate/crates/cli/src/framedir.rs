//! On-disk frame directories shared by the subcommands.
//!
//! ```text
//! trajectory.json     poses keyed by frame index
//! intrinsics.json
//! frames/NNNN.ppm     color
//! frames/NNNN.pfm     metric depth
//! masks/NNNN.ppm      ground-truth static mask (optional)
//! ```

use std::path::Path;

use geomem::io::{self, ppm};
use geomem::{CameraIntrinsics, Frame, Result};

pub const TRAJECTORY: &str = "trajectory.json";
pub const INTRINSICS: &str = "intrinsics.json";

pub fn name(index: i64, ext: &str) -> String {
    format!("{index:04}.{ext}")
}

/// Writes color and depth for every frame plus the camera files.
pub fn write_frames<'a>(dir: &Path, frames: impl IntoIterator<Item = &'a Frame>, intr: &CameraIntrinsics) -> Result<usize> {
    let mut poses = Vec::new();
    for f in frames {
        io::write_ppm(&dir.join("frames").join(name(f.index, "ppm")), &f.image)?;
        io::write_pfm(&dir.join("frames").join(name(f.index, "pfm")), &f.depth)?;
        poses.push((f.index, f.pose));
    }
    io::write_trajectory(&dir.join(TRAJECTORY), &poses)?;
    io::write_intrinsics(&dir.join(INTRINSICS), intr)?;
    Ok(poses.len())
}

pub fn write_mask(dir: &Path, sub: &str, index: i64, intr: &CameraIntrinsics, mask: &[bool]) -> Result<()> {
    io::write_mask_ppm(&dir.join(sub).join(name(index, "ppm")), intr.width, intr.height, mask)
}

/// Mask `sub/NNNN.ppm` if the file exists.
pub fn read_mask(dir: &Path, sub: &str, index: i64) -> Result<Option<Vec<bool>>> {
    let path = dir.join(sub).join(name(index, "ppm"));
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(ppm::image_to_mask(&io::read_ppm(&path)?)))
}

/// Loads every frame listed in the trajectory, in trajectory order.
pub fn read_frames(dir: &Path) -> Result<(Vec<Frame>, CameraIntrinsics)> {
    let intr = io::read_intrinsics(&dir.join(INTRINSICS))?;
    let poses = io::read_trajectory(&dir.join(TRAJECTORY))?;
    let frames = poses
        .into_iter()
        .map(|(index, pose)| {
            let image = io::read_ppm(&dir.join("frames").join(name(index, "ppm")))?;
            let depth = io::read_pfm(&dir.join("frames").join(name(index, "pfm")))?;
            Frame::new(index, image, depth, pose, intr)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((frames, intr))
}
