//! Synthetic dynamic scenes that stand in for the learned video generator.
//!
//! Scenes are analytic, so every rendered frame comes with exact depth and
//! a per-pixel static/dynamic label that the evaluation code can check the
//! fusion against.

mod noise;
mod raycast;
mod scene;
mod trajectory;

pub use noise::{perturb_frame, NoiseModel};
pub use raycast::{render_frame, LabeledFrame};
pub use scene::{
    build_scene, Aabb, DynamicObject, Material, MotionPath, Preset, Primitive, RayHit, Shape, SyntheticScene, SKY_COLOR,
};
pub use trajectory::{is_palindrome, make_trajectory, TrajectorySpec};
