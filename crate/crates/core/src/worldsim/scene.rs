//! Procedural scenes of analytic primitives.

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Rgb;

/// Color of rays that hit nothing.
pub const SKY_COLOR: Rgb = [0.6, 0.8, 1.0];

const HIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn min_v(&self) -> Vector3<f64> {
        Vector3::from(self.min)
    }

    pub fn max_v(&self) -> Vector3<f64> {
        Vector3::from(self.max)
    }

    pub fn contains(&self, p: &Vector3<f64>, slack: f64) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] - slack && p[k] <= self.max[k] + slack)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(0..3).all(|k| self.min[k].is_finite() && self.max[k].is_finite() && self.max[k] > self.min[k]) {
            return Err(Error::invalid(format!("{what}: box {:?}..{:?} is empty or non-finite", self.min, self.max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    Box { min: [f64; 3], max: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
    /// Infinite plane `normal · p = offset`, visible only inside the scene bounds.
    Plane { normal: [f64; 3], offset: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Material {
    Solid { color: Rgb },
    /// 3D checkerboard with cubic cells of side `cell` meters.
    Checker { a: Rgb, b: Rgb, cell: f64 },
}

impl Material {
    /// Color at a surface point whose normal faces the viewer.
    fn shade(&self, p: &Vector3<f64>, facing_normal: &Vector3<f64>) -> Rgb {
        match self {
            Material::Solid { color } => *color,
            Material::Checker { a, b, cell } => {
                // sample half a cell inside the surface so axis-aligned faces
                // never straddle a cell boundary
                let q = (p - facing_normal * (0.5 * cell)) / *cell;
                let parity = q.x.floor() as i64 + q.y.floor() as i64 + q.z.floor() as i64;
                if parity.rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |c: &Rgb| c.iter().all(|v| (0.0..=1.0).contains(v));
        match self {
            Material::Solid { color } if ok(color) => Ok(()),
            Material::Checker { a, b, cell } if ok(a) && ok(b) && *cell > 0.0 => Ok(()),
            _ => Err(Error::invalid(format!("invalid material {self:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Primitive {
    pub shape: Shape,
    pub material: Material,
}

/// Position offset of a dynamic object as a function of the frame index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MotionPath {
    /// `sum_k coefficients[k] * t^k`.
    Polynomial { coefficients: Vec<[f64; 3]> },
    /// `center + amplitude * sin(2π t / period + phase)` per axis.
    Sinusoid {
        center: [f64; 3],
        amplitude: [f64; 3],
        period: f64,
        phase: [f64; 3],
    },
}

impl MotionPath {
    pub fn position(&self, t: f64) -> Vector3<f64> {
        match self {
            MotionPath::Polynomial { coefficients } => {
                let mut acc = Vector3::zeros();
                for c in coefficients.iter().rev() {
                    acc = acc * t + Vector3::from(*c);
                }
                acc
            }
            MotionPath::Sinusoid {
                center,
                amplitude,
                period,
                phase,
            } => {
                let w = std::f64::consts::TAU * t / period;
                Vector3::from_fn(|k, _| center[k] + amplitude[k] * (w + phase[k]).sin())
            }
        }
    }
}

/// A primitive, defined around the local origin, carried along a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicObject {
    pub primitive: Primitive,
    pub path: MotionPath,
}

impl DynamicObject {
    pub fn shape_at(&self, t: f64) -> Shape {
        self.primitive.shape.translated(&self.path.position(t))
    }
}

impl Shape {
    pub fn translated(&self, offset: &Vector3<f64>) -> Shape {
        match self {
            Shape::Box { min, max } => Shape::Box {
                min: (Vector3::from(*min) + offset).into(),
                max: (Vector3::from(*max) + offset).into(),
            },
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: (Vector3::from(*center) + offset).into(),
                radius: *radius,
            },
            Shape::Plane { normal, offset: d } => {
                let n = Vector3::from(*normal);
                Shape::Plane {
                    normal: *normal,
                    offset: d + n.dot(offset),
                }
            }
        }
    }

    /// Nearest hit `t > 0` along `origin + t * dir` and the outward normal.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        match self {
            Shape::Sphere { center, radius } => {
                let oc = origin - Vector3::from(*center);
                let a = dir.dot(dir);
                let half_b = oc.dot(dir);
                let c = oc.dot(&oc) - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t0 = (-half_b - sq) / a;
                let t1 = (-half_b + sq) / a;
                let t = if t0 > HIT_EPS {
                    t0
                } else if t1 > HIT_EPS {
                    t1
                } else {
                    return None;
                };
                let n = (origin + dir * t - Vector3::from(*center)) / *radius;
                Some((t, n))
            }
            Shape::Box { min, max } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                let mut near_axis = 0;
                let mut far_axis = 0;
                for k in 0..3 {
                    if dir[k] == 0.0 {
                        if origin[k] < min[k] || origin[k] > max[k] {
                            return None;
                        }
                        continue;
                    }
                    let inv = 1.0 / dir[k];
                    let (mut ta, mut tb) = ((min[k] - origin[k]) * inv, (max[k] - origin[k]) * inv);
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                    }
                    if ta > t_near {
                        t_near = ta;
                        near_axis = k;
                    }
                    if tb < t_far {
                        t_far = tb;
                        far_axis = k;
                    }
                }
                if t_near > t_far {
                    return None;
                }
                let (t, axis) = if t_near > HIT_EPS {
                    (t_near, near_axis)
                } else if t_far > HIT_EPS {
                    (t_far, far_axis)
                } else {
                    return None;
                };
                let mut n = Vector3::zeros();
                let p = origin[axis] + dir[axis] * t;
                n[axis] = if (p - min[axis]).abs() < (p - max[axis]).abs() { -1.0 } else { 1.0 };
                Some((t, n))
            }
            Shape::Plane { normal, offset } => {
                let n = Vector3::from(*normal);
                let denom = n.dot(dir);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let t = (offset - n.dot(origin)) / denom;
                (t > HIT_EPS).then(|| (t, n.normalize()))
            }
        }
    }

    /// Unsigned distance from `p` to the surface.
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Shape::Sphere { center, radius } => ((p - Vector3::from(*center)).norm() - radius).abs(),
            Shape::Plane { normal, offset } => {
                let n = Vector3::from(*normal);
                (n.dot(p) - offset).abs() / n.norm()
            }
            Shape::Box { min, max } => {
                let (min, max) = (Vector3::from(*min), Vector3::from(*max));
                let outside = Vector3::from_fn(|k, _| (min[k] - p[k]).max(p[k] - max[k]).max(0.0));
                if outside.norm() > 0.0 {
                    outside.norm()
                } else {
                    (0..3).map(|k| (p[k] - min[k]).min(max[k] - p[k])).fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    /// True when `p` is inside the solid, inflated by `margin`. Planes have
    /// no interior.
    pub fn contains(&self, p: &Vector3<f64>, margin: f64) -> bool {
        match self {
            Shape::Sphere { center, radius } => (p - Vector3::from(*center)).norm() <= radius + margin,
            Shape::Box { min, max } => (0..3).all(|k| p[k] >= min[k] - margin && p[k] <= max[k] + margin),
            Shape::Plane { .. } => self.surface_distance(p) <= margin,
        }
    }

    fn bounding_box(&self) -> Option<Aabb> {
        match self {
            Shape::Sphere { center, radius } => Some(Aabb {
                min: [center[0] - radius, center[1] - radius, center[2] - radius],
                max: [center[0] + radius, center[1] + radius, center[2] + radius],
            }),
            Shape::Box { min, max } => Some(Aabb { min: *min, max: *max }),
            Shape::Plane { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Shape::Box { min, max } => Aabb { min: *min, max: *max }.validate("box primitive"),
            Shape::Sphere { center, radius } => {
                if center.iter().all(|c| c.is_finite()) && *radius > 0.0 && radius.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("invalid sphere center {center:?} radius {radius}")))
                }
            }
            Shape::Plane { normal, offset } => {
                if Vector3::from(*normal).norm() > 0.0 && offset.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("plane normal must be nonzero"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    RoomWithMover,
    Corridor,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "room-with-mover" => Ok(Preset::RoomWithMover),
            "corridor" => Ok(Preset::Corridor),
            _ => Err(Error::invalid(format!("unknown preset '{s}' (expected room-with-mover or corridor)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScene {
    pub primitives: Vec<Primitive>,
    pub dynamics: Vec<DynamicObject>,
    pub bounds: Aabb,
    pub seed: u64,
    /// Frames `0..frame_count` over which dynamic objects must stay in bounds.
    #[serde(default = "default_frame_count")]
    pub frame_count: u32,
}

fn default_frame_count() -> u32 {
    200
}

/// Result of casting one ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub color: Rgb,
    pub is_static: bool,
}

impl SyntheticScene {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate("scene bounds")?;
        for (i, p) in self.primitives.iter().enumerate() {
            p.shape.validate().map_err(|e| Error::invalid(format!("primitive {i}: {e}")))?;
            p.material.validate().map_err(|e| Error::invalid(format!("primitive {i}: {e}")))?;
            if !self.shape_meets_bounds(&p.shape) {
                return Err(Error::invalid(format!("primitive {i} does not intersect the scene bounds")));
            }
        }
        for (i, d) in self.dynamics.iter().enumerate() {
            d.primitive.shape.validate().map_err(|e| Error::invalid(format!("dynamic object {i}: {e}")))?;
            d.primitive.material.validate().map_err(|e| Error::invalid(format!("dynamic object {i}: {e}")))?;
            if let MotionPath::Sinusoid { period, .. } = &d.path {
                if !(*period > 0.0) {
                    return Err(Error::invalid(format!("dynamic object {i}: period must be positive")));
                }
            }
            for t in 0..self.frame_count {
                let shape = d.shape_at(t as f64);
                let Some(bb) = shape.bounding_box() else {
                    return Err(Error::invalid(format!("dynamic object {i}: planes cannot move")));
                };
                if !(self.bounds.contains(&bb.min_v(), 1e-9) && self.bounds.contains(&bb.max_v(), 1e-9)) {
                    return Err(Error::invalid(format!("dynamic object {i} leaves the scene bounds at frame {t}")));
                }
            }
        }
        Ok(())
    }

    fn shape_meets_bounds(&self, shape: &Shape) -> bool {
        match shape {
            Shape::Plane { normal, offset } => {
                // some bounds corner on each side (or on the plane)
                let n = Vector3::from(*normal);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for c in 0..8 {
                    let corner = Vector3::from_fn(|k, _| if c >> k & 1 == 1 { self.bounds.max[k] } else { self.bounds.min[k] });
                    let s = n.dot(&corner) - offset;
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                lo <= 0.0 && hi >= 0.0
            }
            _ => {
                let bb = shape.bounding_box().expect("solid shapes have bounds");
                (0..3).all(|k| bb.min[k] <= self.bounds.max[k] && bb.max[k] >= self.bounds.min[k])
            }
        }
    }

    /// The same scene without moving objects.
    pub fn static_only(&self) -> SyntheticScene {
        SyntheticScene {
            dynamics: Vec::new(),
            ..self.clone()
        }
    }

    /// Nearest hit at frame `t`. `dir` need not be normalized; the returned
    /// `t` is in units of `dir`.
    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, t: f64) -> Option<RayHit> {
        let mut best: Option<(f64, Vector3<f64>, &Material, bool)> = None;
        for p in &self.primitives {
            if let Some((hit_t, n)) = p.shape.intersect(origin, dir) {
                if matches!(p.shape, Shape::Plane { .. }) && !self.bounds.contains(&(origin + dir * hit_t), 1e-6) {
                    continue;
                }
                if best.as_ref().map_or(true, |b| hit_t < b.0) {
                    best = Some((hit_t, n, &p.material, true));
                }
            }
        }
        for d in &self.dynamics {
            if let Some((hit_t, n)) = d.shape_at(t).intersect(origin, dir) {
                if best.as_ref().map_or(true, |b| hit_t < b.0) {
                    best = Some((hit_t, n, &d.primitive.material, false));
                }
            }
        }
        best.map(|(hit_t, n, material, is_static)| {
            let facing = if n.dot(dir) > 0.0 { -n } else { n };
            RayHit {
                t: hit_t,
                color: material.shade(&(origin + dir * hit_t), &facing),
                is_static,
            }
        })
    }

    /// Distance from `p` to the nearest static surface. Planes count only
    /// inside the bounds (exact for axis-aligned planes).
    pub fn static_surface_distance(&self, p: &Vector3<f64>) -> f64 {
        self.primitives
            .iter()
            .map(|prim| match prim.shape {
                Shape::Plane { normal, offset } => {
                    let n = Vector3::from(normal);
                    let foot = p - n * ((n.dot(p) - offset) / n.norm_squared());
                    let clamped = foot.zip_zip_map(&self.bounds.min_v(), &self.bounds.max_v(), |x, lo, hi| x.clamp(lo, hi));
                    (p - clamped).norm()
                }
                _ => prim.shape.surface_distance(p),
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `p` lies inside the volume swept by any dynamic object over
    /// the given frames, inflated by `margin`.
    pub fn in_dynamic_swept_volume(&self, p: &Vector3<f64>, frames: std::ops::Range<i64>, margin: f64) -> bool {
        self.dynamics
            .iter()
            .any(|d| frames.clone().any(|t| d.shape_at(t as f64).contains(p, margin)))
    }
}

fn jitter(rng: &mut ChaCha8Rng, amount: f64) -> f64 {
    rng.random_range(-amount..=amount)
}

fn tint(rng: &mut ChaCha8Rng, base: Rgb, amount: f32) -> Rgb {
    base.map(|c| (c + rng.random_range(-amount..=amount)).clamp(0.0, 1.0))
}

/// Deterministic scene for a `(seed, preset)` pair.
pub fn build_scene(seed: u64, preset: Preset) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5cee_0000_0001);
    let scene = match preset {
        Preset::RoomWithMover => room_with_mover(&mut rng, seed),
        Preset::Corridor => corridor(&mut rng, seed),
    };
    debug_assert!(scene.validate().is_ok(), "{:?}", scene.validate());
    scene
}

fn wall(normal: [f64; 3], offset: f64, a: Rgb, b: Rgb, cell: f64) -> Primitive {
    Primitive {
        shape: Shape::Plane { normal, offset },
        material: Material::Checker { a, b, cell },
    }
}

fn solid_box(min: [f64; 3], max: [f64; 3], color: Rgb) -> Primitive {
    Primitive {
        shape: Shape::Box { min, max },
        material: Material::Solid { color },
    }
}

/// A roughly 6 x 3 x 6 m room open toward -Z: floor, ceiling, left, right
/// and back walls with coarse checkerboards, three boxes along the walls and
/// a floating sphere drifting slowly through the middle. Each plane is inset
/// from the bounds by a few centimeters so that no wall lies on the lattice
/// of common voxel sizes.
fn room_with_mover(rng: &mut ChaCha8Rng, seed: u64) -> SyntheticScene {
    let cell = 1.5;
    let mut inset = || 0.05 + jitter(rng, 0.04);
    let (floor, ceiling, left, right, back) = (inset(), 3.0 - inset(), -3.0 + inset(), 3.0 - inset(), 3.0 - inset());
    // the bounds are the room itself, so no plane extends behind another
    let bounds = Aabb {
        min: [left, floor, -3.0],
        max: [right, ceiling, back],
    };
    let mut primitives = vec![
        wall([0.0, 1.0, 0.0], floor, tint(rng, [0.55, 0.5, 0.45], 0.05), tint(rng, [0.45, 0.42, 0.38], 0.05), cell),
        wall([0.0, 1.0, 0.0], ceiling, tint(rng, [0.85, 0.85, 0.8], 0.05), tint(rng, [0.78, 0.78, 0.74], 0.05), cell),
        wall([1.0, 0.0, 0.0], left, tint(rng, [0.7, 0.35, 0.3], 0.05), tint(rng, [0.6, 0.3, 0.26], 0.05), cell),
        wall([1.0, 0.0, 0.0], right, tint(rng, [0.3, 0.45, 0.7], 0.05), tint(rng, [0.26, 0.39, 0.6], 0.05), cell),
        wall([0.0, 0.0, 1.0], back, tint(rng, [0.35, 0.65, 0.4], 0.05), tint(rng, [0.3, 0.56, 0.34], 0.05), cell),
    ];
    let (j1, j2, j3) = (jitter(rng, 0.1), jitter(rng, 0.1), jitter(rng, 0.1));
    primitives.push(solid_box([-2.6 + j1, floor, 1.8 + j1], [-1.8 + j1, 0.8, 2.6 + j1], tint(rng, [0.9, 0.7, 0.2], 0.05)));
    primitives.push(solid_box([1.75 + j2.abs(), floor, 1.5 + j2], [2.6 + j2.abs(), 1.2, 2.5 + j2], tint(rng, [0.2, 0.7, 0.8], 0.05)));
    primitives.push(solid_box([-0.6 + j3, floor, 2.2], [0.4 + j3, 0.5, 2.8], tint(rng, [0.8, 0.3, 0.6], 0.05)));

    let sphere = DynamicObject {
        primitive: Primitive {
            shape: Shape::Sphere {
                center: [0.0; 3],
                radius: 0.35,
            },
            material: Material::Solid {
                color: tint(rng, [0.95, 0.2, 0.15], 0.04),
            },
        },
        path: MotionPath::Sinusoid {
            center: [jitter(rng, 0.1), 1.5, 0.4 + jitter(rng, 0.1)],
            amplitude: [1.2, 0.15, 0.6],
            period: 120.0 + jitter(rng, 20.0),
            phase: [jitter(rng, 3.1), jitter(rng, 3.1), jitter(rng, 3.1)],
        },
    };
    SyntheticScene {
        primitives,
        dynamics: vec![sphere],
        bounds,
        seed,
        frame_count: default_frame_count(),
    }
}

/// A static 3 x 2.5 x 14 m corridor along +Z closed at the far end.
fn corridor(rng: &mut ChaCha8Rng, seed: u64) -> SyntheticScene {
    let bounds = Aabb {
        min: [-1.5, 0.0, -2.0],
        max: [1.5, 2.5, 12.0],
    };
    let cell = 1.0;
    let mut primitives = vec![
        wall([0.0, 1.0, 0.0], 0.0, tint(rng, [0.5, 0.5, 0.5], 0.05), tint(rng, [0.4, 0.4, 0.4], 0.05), cell),
        wall([0.0, 1.0, 0.0], 2.5, tint(rng, [0.85, 0.85, 0.85], 0.05), tint(rng, [0.75, 0.75, 0.75], 0.05), cell),
        wall([1.0, 0.0, 0.0], -1.5, tint(rng, [0.75, 0.55, 0.35], 0.05), tint(rng, [0.65, 0.47, 0.3], 0.05), cell),
        wall([1.0, 0.0, 0.0], 1.5, tint(rng, [0.35, 0.55, 0.75], 0.05), tint(rng, [0.3, 0.47, 0.65], 0.05), cell),
        wall([0.0, 0.0, 1.0], 12.0, tint(rng, [0.4, 0.7, 0.4], 0.05), tint(rng, [0.34, 0.6, 0.34], 0.05), cell),
    ];
    for i in 0..4 {
        let z = 1.0 + 2.8 * i as f64 + jitter(rng, 0.3);
        let side = if i % 2 == 0 { -1.0 } else { 1.0 };
        let (x0, x1) = if side < 0.0 { (-1.5, -1.0) } else { (1.0, 1.5) };
        primitives.push(solid_box([x0, 0.0, z], [x1, 0.6 + 0.3 * i as f64, z + 0.8], tint(rng, [0.8, 0.6, 0.3], 0.15)));
    }
    SyntheticScene {
        primitives,
        dynamics: Vec::new(),
        bounds,
        seed,
        frame_count: default_frame_count(),
    }
}
