//! Z-buffered square-splat rendering of point clouds.

use crate::camera::{project, CameraIntrinsics, CameraPose};
use crate::types::{DepthMap, Image, PointCloud};

pub const DEFAULT_SPLAT_RADIUS: u32 = 1;

/// Depths closer than this are considered equal; the lower point index wins.
pub const DEPTH_TIE_EPS: f64 = 1e-9;

/// Color, depth and coverage of a rendered point cloud. Uncovered pixels
/// are black with invalid (zero) depth.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub image: Image,
    pub depth: DepthMap,
    pub mask: Vec<bool>,
}

impl RenderedView {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            image: Image::black(width, height),
            depth: DepthMap::invalid(width, height),
            mask: vec![false; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn covered(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Renders `cloud` from `pose`. Every point covers a `(2r+1)²` square around
/// its rounded pixel; each pixel keeps the nearest point.
pub fn render_points(cloud: &PointCloud, intr: &CameraIntrinsics, pose: &CameraPose, splat_radius: u32) -> RenderedView {
    let (w, h) = (intr.width as usize, intr.height as usize);
    let r = splat_radius as i64;
    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut owner = vec![usize::MAX; w * h];

    for (idx, p) in cloud.positions().iter().enumerate() {
        let cam = pose.world_to_cam(p);
        let Some(proj) = project(&cam, intr) else {
            continue;
        };
        let Some((col, row)) = intr.round_pixel(proj.u, proj.v) else {
            continue;
        };
        let (col, row) = (col as i64, row as i64);
        for y in (row - r).max(0)..=(row + r).min(h as i64 - 1) {
            for x in (col - r).max(0)..=(col + r).min(w as i64 - 1) {
                let k = y as usize * w + x as usize;
                // points arrive in index order, so a tie keeps the earlier one
                if proj.z < zbuf[k] - DEPTH_TIE_EPS {
                    zbuf[k] = proj.z;
                    owner[k] = idx;
                }
            }
        }
    }

    let mut view = RenderedView::empty(intr.width, intr.height);
    let colors = cloud.colors();
    let pixels = view.image.pixels_mut();
    for k in 0..w * h {
        if owner[k] != usize::MAX {
            pixels[k] = colors[owner[k]];
        }
    }
    let depths = view.depth.depths_mut();
    for k in 0..w * h {
        if owner[k] != usize::MAX {
            depths[k] = zbuf[k] as f32;
            view.mask[k] = true;
        }
    }
    view
}

/// Share of pixels the memory rendering leaves uncovered.
pub fn reveal_fraction(view: &RenderedView) -> f64 {
    let total = view.mask.len();
    if total == 0 {
        return 1.0;
    }
    (total - view.covered()) as f64 / total as f64
}
