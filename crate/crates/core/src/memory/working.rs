use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::types::Frame;

/// Default window of `k + 1` recent frames.
pub const DEFAULT_CONTEXT: usize = 5;

/// Bounded window over the most recent frames of the generation stream.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingMemory {
    window: VecDeque<Frame>,
    capacity: usize,
}

impl WorkingMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("working memory capacity must be at least 1"));
        }
        Ok(Self {
            window: VecDeque::with_capacity(capacity + 1),
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn last_index(&self) -> Option<i64> {
        self.window.back().map(|f| f.index)
    }

    /// Appends the next frame of the stream, dropping the oldest beyond
    /// capacity. Indices must be contiguous.
    pub fn push(&mut self, frame: Frame) -> Result<()> {
        if let Some(last) = self.last_index() {
            if frame.index != last + 1 {
                return Err(Error::invalid(format!(
                    "working memory expects frame {} next, got {}",
                    last + 1,
                    frame.index
                )));
            }
        }
        self.window.push_back(frame);
        while self.window.len() > self.capacity {
            self.window.pop_front();
        }
        Ok(())
    }

    /// Frames oldest first.
    pub fn window(&self) -> impl ExactSizeIterator<Item = &Frame> + '_ {
        self.window.iter()
    }
}
