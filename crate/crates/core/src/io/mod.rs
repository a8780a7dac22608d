//! File formats: PLY point clouds, PPM images, PFM depth maps and JSON
//! camera descriptions.
//!
//! Every reader works on an in-memory byte slice and reports the byte offset
//! of the first offending byte. The `read_*_file`/`write_*_file` helpers are
//! thin path wrappers.

pub mod json;
pub mod pfm;
pub mod ply;
pub mod ppm;

pub use json::{read_intrinsics, read_trajectory, write_intrinsics, write_trajectory, PoseRecord};
pub use pfm::{read_pfm, write_pfm};
pub use ply::{read_ply, write_ply};
pub use ppm::{read_ppm, write_mask_ppm, write_ppm};

use std::path::Path;

use crate::error::Result;

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

/// Cursor over an ASCII header followed by binary data.
pub(crate) struct HeaderCursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
    pub format: &'static str,
}

impl<'a> HeaderCursor<'a> {
    pub fn new(bytes: &'a [u8], format: &'static str) -> Self {
        Self { bytes, pos: 0, format }
    }

    pub fn error(&self, offset: usize, msg: impl Into<String>) -> crate::Error {
        crate::Error::format(self.format, offset, msg)
    }

    /// Reads up to (and consumes) the next `\n`. Returns the line start offset.
    pub fn line(&mut self) -> Result<(usize, &'a str)> {
        let start = self.pos;
        let rel = self.bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| self.error(self.bytes.len(), "truncated header: missing newline"))?;
        let raw = &self.bytes[start..start + rel];
        self.pos = start + rel + 1;
        let text = std::str::from_utf8(raw).map_err(|e| self.error(start + e.valid_up_to(), "header is not valid ASCII"))?;
        Ok((start, text.trim_end_matches('\r')))
    }

    /// Next whitespace-separated token, skipping `#` comments (PNM style).
    pub fn token(&mut self) -> Result<(usize, &'a str)> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(start, "truncated header: expected a token"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| self.error(start, "header token is not ASCII"))?;
        Ok((start, text))
    }

    /// Consumes exactly one whitespace byte separating the header from data.
    pub fn single_whitespace(&mut self) -> Result<()> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            Some(_) => Err(self.error(self.pos, "expected whitespace after header")),
            None => Err(self.error(self.pos, "truncated file: no data after header")),
        }
    }

    pub fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<(usize, T)> {
        let (off, tok) = self.token()?;
        let v = tok.parse().map_err(|_| self.error(off, format!("invalid {what} '{tok}'")))?;
        Ok((off, v))
    }
}
