//! Truncated signed distance fusion.
//!
//! Each voxel keeps a normalized signed distance `D` in `[-1, 1]`, an
//! accumulated weight `W`, a weighted-mean color and `M2`, the weighted sum
//! of squared deviations of every normalized distance it has received. New
//! observations are folded in with the running weighted average
//!
//! ```text
//! D' = (W * D + w * d) / (W + w),    W' = W + w
//! ```
//!
//! and `M2` follows the weighted form of Welford's update so that `M2 / W`
//! is the population variance of the contributions. Surfaces that move
//! between frames receive conflicting distances, which either pulls `D` out
//! of the surface band or inflates the variance; both exclude the voxel from
//! [`TsdfVolume::extract_static_points`].

use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{project, CameraIntrinsics};
use crate::error::{Error, Result};
use crate::types::{Frame, PointCloud, Rgb};

/// Hard upper bound on the voxel count along any axis.
pub const MAX_GRID_DIM: usize = 1200;

const CHECKPOINT_MAGIC: &[u8; 4] = b"TSDF";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Truncation distance in meters; `None` means five voxels.
    pub truncation: Option<f64>,
    pub frame_weight: f64,
    pub max_grid_dim: usize,
    /// Minimum accumulated weight for a voxel to be extracted.
    pub min_weight: f64,
    /// Maximum `|D|` (normalized) for a voxel to count as surface.
    pub surface_band: f64,
    /// Maximum normalized variance `M2 / W` for extraction.
    pub variance_cap: f64,
    pub variance_filter: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            truncation: None,
            frame_weight: 1.0,
            max_grid_dim: MAX_GRID_DIM,
            min_weight: 3.0,
            surface_band: 0.25,
            variance_cap: 0.15,
            variance_filter: true,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frame_weight", self.frame_weight),
            ("min_weight", self.min_weight),
            ("surface_band", self.surface_band),
            ("variance_cap", self.variance_cap),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("fusion {name} must be positive, got {v}")));
            }
        }
        if let Some(t) = self.truncation {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("truncation must be positive, got {t}")));
            }
        }
        if self.max_grid_dim == 0 || self.max_grid_dim > MAX_GRID_DIM {
            return Err(Error::invalid(format!(
                "max_grid_dim must be in 1..={MAX_GRID_DIM}, got {}",
                self.max_grid_dim
            )));
        }
        Ok(())
    }

    pub fn truncation_for(&self, voxel_size: f64) -> f64 {
        self.truncation.unwrap_or(5.0 * voxel_size)
    }
}

/// Placement and resolution of a voxel grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Minimum corner in world coordinates.
    pub origin: Vector3<f64>,
    pub voxel_size: f64,
    pub dims: [usize; 3],
}

fn axis_dim(extent: f64, voxel: f64) -> usize {
    // absorb representation error so that e.g. 2.4 / 0.002 counts as 1200
    let raw = extent / voxel;
    ((raw - raw.abs() * 1e-9).ceil() as usize).max(1)
}

impl GridSpec {
    /// Sizes a grid over the box, growing the voxel when the largest axis
    /// would need more than `max_dim` voxels. Reaching `max_dim` exactly is
    /// allowed.
    pub fn fit(bounds_min: Vector3<f64>, bounds_max: Vector3<f64>, requested_voxel: f64, max_dim: usize) -> Result<Self> {
        if !(requested_voxel > 0.0 && requested_voxel.is_finite()) {
            return Err(Error::invalid(format!("voxel size must be positive, got {requested_voxel}")));
        }
        if max_dim == 0 {
            return Err(Error::invalid("max grid dimension must be positive"));
        }
        let extent = bounds_max - bounds_min;
        if !extent.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return Err(Error::invalid(format!(
                "bounds must have positive finite extent, got {:?}",
                extent.as_slice()
            )));
        }
        let mut voxel = requested_voxel;
        let mut dims = [0; 3];
        for k in 0..3 {
            dims[k] = axis_dim(extent[k], voxel);
        }
        if dims.iter().copied().max().unwrap_or(0) > max_dim {
            voxel = extent.max() / max_dim as f64;
            for k in 0..3 {
                dims[k] = axis_dim(extent[k], voxel).min(max_dim);
            }
        }
        Ok(Self {
            origin: bounds_min,
            voxel_size: voxel,
            dims,
        })
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Linear index with x varying fastest.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let ix = index % self.dims[0];
        let iy = (index / self.dims[0]) % self.dims[1];
        let iz = index / (self.dims[0] * self.dims[1]);
        [ix, iy, iz]
    }

    #[inline]
    pub fn voxel_center(&self, ix: usize, iy: usize, iz: usize) -> Vector3<f64> {
        self.origin
            + Vector3::new(
                (ix as f64 + 0.5) * self.voxel_size,
                (iy as f64 + 0.5) * self.voxel_size,
                (iz as f64 + 0.5) * self.voxel_size,
            )
    }

    /// Voxel containing a world point, if inside the grid.
    pub fn locate(&self, p: &Vector3<f64>) -> Option<[usize; 3]> {
        let rel = (p - self.origin) / self.voxel_size;
        let mut out = [0; 3];
        for k in 0..3 {
            let c = rel[k].floor();
            if !(c >= 0.0 && c < self.dims[k] as f64) {
                return None;
            }
            out[k] = c as usize;
        }
        Some(out)
    }
}

/// Normalized truncated signed distance of a voxel center with respect to
/// the surface observed in `frame`. `None` when the center does not project
/// into the image, the depth there is invalid, or the center lies more than
/// one truncation distance behind the surface.
pub fn voxel_sdf(center: &Vector3<f64>, frame: &Frame, truncation: f64) -> Option<f64> {
    let cam = frame.pose.world_to_cam(center);
    sdf_from_cam(&cam, frame, truncation).map(|(sdf, _)| sdf)
}

#[inline]
fn sdf_from_cam(cam: &Vector3<f64>, frame: &Frame, truncation: f64) -> Option<(f64, usize)> {
    let intr: &CameraIntrinsics = &frame.intrinsics;
    let p = project(cam, intr)?;
    let (col, row) = intr.round_pixel(p.u, p.v)?;
    let depth = frame.depth.get(col, row)? as f64;
    let sdf = (depth - p.z) / truncation;
    if sdf < -1.0 {
        return None;
    }
    Some((sdf.min(1.0), row * intr.width as usize + col))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsdfVolume {
    grid: GridSpec,
    truncation: f64,
    tsdf: Vec<f32>,
    weight: Vec<f32>,
    m2: Vec<f32>,
    color: Vec<Rgb>,
}

impl TsdfVolume {
    /// Allocates a volume covering `[bounds_min, bounds_max]`. Unobserved
    /// voxels start as free space (`D = 1`, `W = 0`).
    pub fn new(bounds_min: Vector3<f64>, bounds_max: Vector3<f64>, requested_voxel: f64, cfg: &FusionConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = GridSpec::fit(bounds_min, bounds_max, requested_voxel, cfg.max_grid_dim)?;
        Self::with_grid(grid, cfg.truncation_for(grid.voxel_size))
    }

    pub fn with_grid(grid: GridSpec, truncation: f64) -> Result<Self> {
        if !(truncation >= grid.voxel_size) {
            return Err(Error::invalid(format!(
                "truncation {truncation} must be at least the voxel size {}",
                grid.voxel_size
            )));
        }
        if grid.dims.iter().any(|&d| d == 0 || d > MAX_GRID_DIM) {
            return Err(Error::invalid(format!("grid dims {:?} outside 1..={MAX_GRID_DIM}", grid.dims)));
        }
        let n = grid.voxel_count();
        Ok(Self {
            grid,
            truncation,
            tsdf: vec![1.0; n],
            weight: vec![0.0; n],
            m2: vec![0.0; n],
            color: vec![[0.0; 3]; n],
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn voxel_size(&self) -> f64 {
        self.grid.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn tsdf(&self) -> &[f32] {
        &self.tsdf
    }

    pub fn weights(&self) -> &[f32] {
        &self.weight
    }

    pub fn colors(&self) -> &[Rgb] {
        &self.color
    }

    /// Normalized variance `M2 / W`, `None` for unobserved voxels.
    pub fn variance(&self, index: usize) -> Option<f64> {
        let w = self.weight[index] as f64;
        (w > 0.0).then(|| self.m2[index] as f64 / w)
    }

    /// Folds one frame into the volume. Voxels whose distance is undefined
    /// for this frame are left untouched. The result does not depend on how
    /// rayon schedules slices.
    pub fn integrate_frame(&mut self, frame: &Frame, cfg: &FusionConfig) -> Result<()> {
        frame.validate()?;
        let w_i = cfg.frame_weight;
        if !(w_i > 0.0 && w_i.is_finite()) {
            return Err(Error::invalid(format!("frame weight must be positive, got {w_i}")));
        }
        let grid = self.grid;
        let tau = self.truncation;
        let slice = grid.dims[0] * grid.dims[1];
        let pixels = frame.image.pixels();

        self.tsdf
            .par_chunks_mut(slice)
            .zip(self.weight.par_chunks_mut(slice))
            .zip(self.m2.par_chunks_mut(slice))
            .zip(self.color.par_chunks_mut(slice))
            .enumerate()
            .for_each(|(iz, (((d_sl, w_sl), m2_sl), c_sl))| {
                for iy in 0..grid.dims[1] {
                    for ix in 0..grid.dims[0] {
                        let center = grid.voxel_center(ix, iy, iz);
                        let cam = frame.pose.world_to_cam(&center);
                        let Some((d_i, pix)) = sdf_from_cam(&cam, frame, tau) else {
                            continue;
                        };
                        let k = ix + grid.dims[0] * iy;
                        let w_old = w_sl[k] as f64;
                        let d_old = d_sl[k] as f64;
                        let w_new = w_old + w_i;
                        let d_new = (w_old * d_old + w_i * d_i) / w_new;
                        let m2_new = m2_sl[k] as f64 + w_i * (d_i - d_old) * (d_i - d_new);
                        d_sl[k] = (d_new as f32).clamp(-1.0, 1.0);
                        w_sl[k] = w_new as f32;
                        m2_sl[k] = m2_new.max(0.0) as f32;
                        let px = pixels[pix];
                        let c = &mut c_sl[k];
                        for ch in 0..3 {
                            c[ch] = (((w_old * c[ch] as f64 + w_i * px[ch] as f64) / w_new) as f32).clamp(0.0, 1.0);
                        }
                    }
                }
            });
        Ok(())
    }

    /// True when voxel `index` passes the static-surface tests.
    pub fn is_static_surface(&self, index: usize, cfg: &FusionConfig) -> bool {
        let w = self.weight[index] as f64;
        if !(w >= cfg.min_weight) {
            return false;
        }
        if (self.tsdf[index] as f64).abs() > cfg.surface_band {
            return false;
        }
        !(cfg.variance_filter && self.m2[index] as f64 / w > cfg.variance_cap)
    }

    /// One point per voxel that is well observed, close to the surface and
    /// (optionally) consistent over time. Points are voxel centers ordered
    /// lexicographically by `(ix, iy, iz)`; confidence is the weight.
    pub fn extract_static_points(&self, cfg: &FusionConfig) -> PointCloud {
        let [nx, ny, nz] = self.grid.dims;
        let mut cloud = PointCloud::default();
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    let i = self.grid.index(ix, iy, iz);
                    if self.is_static_surface(i, cfg) {
                        cloud.push(self.grid.voxel_center(ix, iy, iz), self.color[i], self.weight[i]);
                    }
                }
            }
        }
        cloud
    }

    #[cfg(test)]
    pub(crate) fn set_voxel(&mut self, index: usize, d: f32, w: f32, m2: f32, color: Rgb) {
        self.tsdf[index] = d;
        self.weight[index] = w;
        self.m2[index] = m2;
        self.color[index] = color;
    }

    pub fn encode_checkpoint(&self) -> Vec<u8> {
        let n = self.grid.voxel_count();
        let mut out = Vec::with_capacity(80 + n * 24);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for v in self.grid.origin.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.grid.voxel_size.to_le_bytes());
        for d in self.grid.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.truncation.to_le_bytes());
        for arr in [&self.tsdf, &self.weight, &self.m2] {
            for v in arr.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for c in &self.color {
            for ch in c {
                out.extend_from_slice(&ch.to_le_bytes());
            }
        }
        out
    }

    pub fn decode_checkpoint(bytes: &[u8]) -> Result<Self> {
        const FMT: &str = "TSDF checkpoint";
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize, what: &str| -> Result<&[u8]> {
            if bytes.len() < *pos + n {
                return Err(Error::format(FMT, bytes.len(), format!("truncated while reading {what}")));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().expect("8 bytes"));
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));

        if take(&mut pos, 4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::format(FMT, 0, "bad magic, expected 'TSDF'"));
        }
        let version = u32_at(take(&mut pos, 4, "version")?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(FMT, 4, format!("unsupported version {version}")));
        }
        let mut origin = Vector3::zeros();
        for k in 0..3 {
            origin[k] = f64_at(take(&mut pos, 8, "origin")?);
        }
        let voxel_off = pos;
        let voxel_size = f64_at(take(&mut pos, 8, "voxel size")?);
        let dims_off = pos;
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            *d = u32_at(take(&mut pos, 4, "dims")?) as usize;
        }
        let tau_off = pos;
        let truncation = f64_at(take(&mut pos, 8, "truncation")?);
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::format(FMT, 8, "non-finite origin"));
        }
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::format(FMT, voxel_off, format!("invalid voxel size {voxel_size}")));
        }
        if dims.iter().any(|&d| d == 0 || d > MAX_GRID_DIM) {
            return Err(Error::format(FMT, dims_off, format!("grid dims {dims:?} outside 1..={MAX_GRID_DIM}")));
        }
        if !(truncation >= voxel_size && truncation.is_finite()) {
            return Err(Error::format(FMT, tau_off, format!("invalid truncation {truncation}")));
        }
        let grid = GridSpec {
            origin,
            voxel_size,
            dims,
        };
        let n = grid.voxel_count();
        let expected = pos + n * 4 * 6;
        if bytes.len() != expected {
            return Err(Error::format(
                FMT,
                bytes.len().min(expected),
                format!("voxel payload size mismatch: expected {expected} bytes in total, file has {}", bytes.len()),
            ));
        }
        let read_f32s = |pos: &mut usize, count: usize| -> Vec<f32> {
            let out = bytes[*pos..*pos + count * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            *pos += count * 4;
            out
        };
        let d_off = pos;
        let tsdf = read_f32s(&mut pos, n);
        let w_off = pos;
        let weight = read_f32s(&mut pos, n);
        let m2_off = pos;
        let m2 = read_f32s(&mut pos, n);
        let c_off = pos;
        let flat = read_f32s(&mut pos, n * 3);
        if let Some(i) = tsdf.iter().position(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::format(FMT, d_off + 4 * i, format!("voxel {i}: D outside [-1, 1]")));
        }
        if let Some(i) = weight.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::format(FMT, w_off + 4 * i, format!("voxel {i}: invalid weight")));
        }
        if let Some(i) = m2.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::format(FMT, m2_off + 4 * i, format!("voxel {i}: invalid M2")));
        }
        if let Some(i) = flat.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::format(FMT, c_off + 4 * i, format!("voxel {}: color outside [0, 1]", i / 3)));
        }
        let color = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self {
            grid,
            truncation,
            tsdf,
            weight,
            m2,
            color,
        })
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        crate::io::write_bytes(path, &self.encode_checkpoint())
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        Self::decode_checkpoint(&crate::io::read_bytes(path)?)
    }
}
