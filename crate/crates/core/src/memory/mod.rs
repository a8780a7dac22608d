//! The three memory banks: a long-term static point cloud (spatial), a
//! sparse set of keyframes that revealed new territory (episodic) and the
//! most recent frames (working).

mod episodic;
mod icp;
mod spatial;
mod working;

pub use episodic::{EpisodicMemory, EpisodicSlot, DEFAULT_EPISODIC_CAPACITY, DEFAULT_REVEAL_THRESHOLD};
pub use icp::{align_chunk, AlignResult, AlignmentMode, IcpConfig};
pub use spatial::{CellKey, SpatialMemory};
pub use working::{WorkingMemory, DEFAULT_CONTEXT};
