//! Geometry-grounded spatial memory for autoregressive video world models.
//!
//! The crate fuses per-frame RGB-D observations into a truncated signed
//! distance volume, extracts the static part of the scene as a point cloud,
//! keeps working and episodic frame memories, renders memory-conditioned
//! guidance views and evaluates long-horizon view-recall consistency. A
//! procedural ray-cast scene generator stands in for the learned video model.

pub mod camera;
pub mod error;
pub mod eval;
pub mod io;
pub mod memory;
pub mod pipeline;
pub mod render;
pub mod tsdf;
pub mod types;
pub mod worldsim;

pub use camera::{backproject, project, CameraIntrinsics, CameraPose, Direction, Projection, RigidTransform};
pub use error::{Error, Result};
pub use types::{DepthMap, Frame, Image, PointCloud};
