//! Chunk-to-memory alignment: identity under shared oracle poses, or
//! point-to-point ICP with nearest neighbors from the memory's cell grid.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::spatial::SpatialMemory;
use crate::camera::RigidTransform;
use crate::error::{Error, Result};
use crate::types::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentMode {
    /// Chunks already share the memory's world frame.
    KnownPoses,
    Icp,
}

impl std::str::FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known-poses" => Ok(Self::KnownPoses),
            "icp" => Ok(Self::Icp),
            _ => Err(Error::invalid(format!("unknown alignment mode '{s}' (expected known-poses or icp)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcpConfig {
    pub iterations: usize,
    /// Correspondences farther apart than this are ignored (meters).
    pub max_correspondence: f64,
    /// Stop once the RMS improves by less than this.
    pub tolerance: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            max_correspondence: 0.25,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignResult {
    /// Maps the new chunk into the memory frame.
    pub transform: RigidTransform,
    /// RMS correspondence distance under `transform`.
    pub rms: f64,
    pub iterations: usize,
    /// Set when the residual grew on three consecutive iterations.
    pub diverged: bool,
    /// RMS of every accepted iteration; non-increasing.
    pub history: Vec<f64>,
}

impl AlignResult {
    fn identity() -> Self {
        Self {
            transform: RigidTransform::identity(),
            rms: 0.0,
            iterations: 0,
            diverged: false,
            history: Vec::new(),
        }
    }
}

/// Closed-form least-squares rigid fit `dst ≈ R * src + t` (Kabsch).
pub(crate) fn fit_rigid(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> RigidTransform {
    debug_assert_eq!(src.len(), dst.len());
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut r = v_t.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut fix = Matrix3::identity();
        fix[(2, 2)] = -1.0;
        r = v_t.transpose() * fix * u.transpose();
    }
    RigidTransform {
        rotation: r,
        translation: cd - r * cs,
    }
}

/// Pairs each transformed source point with its nearest memory point.
fn correspondences(
    src: &PointCloud,
    transform: &RigidTransform,
    mem: &SpatialMemory,
    max_dist: f64,
) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>, f64) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut sq = 0.0;
    for p in src.positions() {
        let q = transform.cam_to_world(p);
        if let Some((idx, d)) = mem.nearest(&q, max_dist) {
            a.push(*p);
            b.push(mem.cloud().positions()[idx]);
            sq += d * d;
        }
    }
    let rms = if a.is_empty() { f64::INFINITY } else { (sq / a.len() as f64).sqrt() };
    (a, b, rms)
}

/// Estimates the transform that places `new_points` into the memory frame.
pub fn align_chunk(new_points: &PointCloud, mem: &SpatialMemory, mode: AlignmentMode, cfg: &IcpConfig) -> Result<AlignResult> {
    match mode {
        AlignmentMode::KnownPoses => Ok(AlignResult::identity()),
        AlignmentMode::Icp => icp(new_points, mem, cfg),
    }
}

fn icp(src: &PointCloud, mem: &SpatialMemory, cfg: &IcpConfig) -> Result<AlignResult> {
    if src.is_empty() || mem.is_empty() {
        return Err(Error::invalid("ICP needs non-empty source and memory clouds"));
    }
    let mut current = RigidTransform::identity();
    let (mut a, mut b, mut rms) = correspondences(src, &current, mem, cfg.max_correspondence);
    if a.len() < 3 {
        return Err(Error::invalid(format!(
            "ICP found only {} correspondences within {} m",
            a.len(),
            cfg.max_correspondence
        )));
    }
    let mut best = (current, rms);
    let mut history = vec![rms];
    let mut increases = 0;
    let mut diverged = false;
    let mut iterations = 0;
    for _ in 0..cfg.iterations {
        iterations += 1;
        let candidate = fit_rigid(&a, &b);
        let (na, nb, new_rms) = correspondences(src, &candidate, mem, cfg.max_correspondence);
        if new_rms > rms {
            increases += 1;
            if increases >= 3 {
                diverged = true;
                break;
            }
        } else {
            increases = 0;
        }
        current = candidate;
        let improvement = rms - new_rms;
        rms = new_rms;
        a = na;
        b = nb;
        if rms <= best.1 {
            best = (current, rms);
            history.push(rms);
        }
        if a.len() < 3 || (improvement >= 0.0 && improvement < cfg.tolerance) {
            break;
        }
    }
    Ok(AlignResult {
        transform: best.0,
        rms: best.1,
        iterations,
        diverged,
        history,
    })
}
