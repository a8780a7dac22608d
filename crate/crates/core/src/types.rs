//! Images, depth maps, frames and point clouds.

use nalgebra::Vector3;

use crate::camera::{backproject, CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};

pub type Rgb = [f32; 3];

/// Row-major RGB image with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl Image {
    pub fn new(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Dimension(format!(
                "image {width}x{height} needs {} pixels, got {}",
                width as usize * height as usize,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| p.iter().any(|c| !(0.0..=1.0).contains(c))) {
            return Err(Error::invalid(format!("pixel {i} has a channel outside [0, 1]: {:?}", pixels[i])));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn black(width: u32, height: u32) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, col: usize, row: usize) -> Rgb {
        self.pixels[row * self.width as usize + col]
    }

    /// Mutable pixel access. Callers must keep channels in `[0, 1]`.
    pub(crate) fn pixels_mut(&mut self) -> &mut [Rgb] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.pixels
    }
}

/// Row-major metric depth. Depths that are non-finite or `<= 0` are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    depths: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, depths: Vec<f32>) -> Result<Self> {
        if depths.len() != width as usize * height as usize {
            return Err(Error::Dimension(format!(
                "depth map {width}x{height} needs {} values, got {}",
                width as usize * height as usize,
                depths.len()
            )));
        }
        Ok(Self { width, height, depths })
    }

    pub fn invalid(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            depths: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn depths(&self) -> &[f32] {
        &self.depths
    }

    pub(crate) fn depths_mut(&mut self) -> &mut [f32] {
        &mut self.depths
    }

    #[inline]
    pub fn is_valid_depth(d: f32) -> bool {
        d.is_finite() && d > 0.0
    }

    /// Depth at a pixel, `None` when invalid.
    pub fn get(&self, col: usize, row: usize) -> Option<f32> {
        let d = self.depths[row * self.width as usize + col];
        Self::is_valid_depth(d).then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.depths.iter().filter(|d| Self::is_valid_depth(**d)).count()
    }
}

/// One RGB-D observation with its camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: i64,
    pub image: Image,
    pub depth: DepthMap,
    pub pose: CameraPose,
    pub intrinsics: CameraIntrinsics,
}

impl Frame {
    pub fn new(index: i64, image: Image, depth: DepthMap, pose: CameraPose, intrinsics: CameraIntrinsics) -> Result<Self> {
        let frame = Self {
            index,
            image,
            depth,
            pose,
            intrinsics,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        if self.image.width() != w || self.image.height() != h {
            return Err(Error::Dimension(format!(
                "frame {}: image is {}x{} but intrinsics say {w}x{h}",
                self.index,
                self.image.width(),
                self.image.height()
            )));
        }
        if self.depth.width() != w || self.depth.height() != h {
            return Err(Error::Dimension(format!(
                "frame {}: depth is {}x{} but intrinsics say {w}x{h}",
                self.index,
                self.depth.width(),
                self.depth.height()
            )));
        }
        Ok(())
    }

    /// World-frame points of all valid depth pixels.
    pub fn world_points(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        let w = self.intrinsics.width as usize;
        self.depth.depths().iter().enumerate().filter_map(move |(i, &d)| {
            if !DepthMap::is_valid_depth(d) {
                return None;
            }
            let p = backproject((i % w) as f64, (i / w) as f64, d as f64, &self.intrinsics).ok()?;
            Some(self.pose.cam_to_world(&p))
        })
    }
}

/// World-frame points with colors and nonnegative confidences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vector3<f64>>,
    colors: Vec<Rgb>,
    confidences: Vec<f32>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vector3<f64>>, colors: Vec<Rgb>, confidences: Vec<f32>) -> Result<Self> {
        if positions.len() != colors.len() || positions.len() != confidences.len() {
            return Err(Error::Dimension(format!(
                "point cloud arrays differ in length: {} positions, {} colors, {} confidences",
                positions.len(),
                colors.len(),
                confidences.len()
            )));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::invalid(format!("point {i} has a non-finite position")));
        }
        if let Some(i) = confidences.iter().position(|c| !(*c >= 0.0)) {
            return Err(Error::invalid(format!("point {i} has a negative or NaN confidence")));
        }
        Ok(Self {
            positions,
            colors,
            confidences,
        })
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            positions: Vec::with_capacity(n),
            colors: Vec::with_capacity(n),
            confidences: Vec::with_capacity(n),
        }
    }

    /// Appends a point; the caller guarantees a finite position and a
    /// nonnegative confidence.
    pub(crate) fn push(&mut self, position: Vector3<f64>, color: Rgb, confidence: f32) {
        debug_assert!(position.iter().all(|x| x.is_finite()) && confidence >= 0.0);
        self.positions.push(position);
        self.colors.push(color);
        self.confidences.push(confidence);
    }

    pub(crate) fn set(&mut self, i: usize, position: Vector3<f64>, color: Rgb, confidence: f32) {
        self.positions[i] = position;
        self.colors[i] = color;
        self.confidences[i] = confidence;
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn colors(&self) -> &[Rgb] {
        &self.colors
    }

    pub fn confidences(&self) -> &[f32] {
        &self.confidences
    }

    /// Applies a rigid transform (as camera-to-world) to every position.
    pub fn transformed(&self, transform: &CameraPose) -> PointCloud {
        PointCloud {
            positions: self.positions.iter().map(|p| transform.cam_to_world(p)).collect(),
            colors: self.colors.clone(),
            confidences: self.confidences.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_bad_sizes_and_ranges() {
        assert!(Image::new(2, 2, vec![[0.0; 3]; 3]).is_err());
        assert!(Image::new(1, 1, vec![[0.0, 1.5, 0.0]]).is_err());
        assert!(Image::new(1, 1, vec![[0.0, f32::NAN, 0.0]]).is_err());
        assert!(Image::new(1, 1, vec![[0.0, 1.0, 0.5]]).is_ok());
    }

    #[test]
    fn depth_validity_convention() {
        let d = DepthMap::new(4, 1, vec![1.0, 0.0, -1.0, f32::INFINITY]).unwrap();
        assert_eq!(d.get(0, 0), Some(1.0));
        assert_eq!(d.get(1, 0), None);
        assert_eq!(d.get(2, 0), None);
        assert_eq!(d.get(3, 0), None);
        assert_eq!(d.valid_count(), 1);
    }

    #[test]
    fn frame_checks_dimensions() {
        let intr = CameraIntrinsics::new(10.0, 10.0, 1.0, 1.0, 3, 2).unwrap();
        let ok = Frame::new(0, Image::black(3, 2), DepthMap::invalid(3, 2), CameraPose::identity(), intr);
        assert!(ok.is_ok());
        let bad = Frame::new(0, Image::black(2, 3), DepthMap::invalid(3, 2), CameraPose::identity(), intr);
        assert!(matches!(bad, Err(Error::Dimension(_))));
        let bad = Frame::new(0, Image::black(3, 2), DepthMap::invalid(3, 3), CameraPose::identity(), intr);
        assert!(matches!(bad, Err(Error::Dimension(_))));
    }

    #[test]
    fn point_cloud_invariants() {
        assert!(PointCloud::new(vec![Vector3::zeros()], vec![], vec![1.0]).is_err());
        assert!(PointCloud::new(vec![Vector3::new(f64::NAN, 0.0, 0.0)], vec![[0.0; 3]], vec![1.0]).is_err());
        assert!(PointCloud::new(vec![Vector3::zeros()], vec![[0.0; 3]], vec![-1.0]).is_err());
        assert_eq!(PointCloud::new(vec![], vec![], vec![]).unwrap().len(), 0);
    }
}
