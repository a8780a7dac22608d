//! Grayscale PFM (`Pf`). Written little-endian (scale `-1.0`) with rows
//! stored bottom-up as the format requires.

use std::path::Path;

use super::HeaderCursor;
use crate::error::Result;
use crate::types::DepthMap;

const FORMAT: &str = "PFM";

pub fn encode_pfm(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = (depth.width() as usize, depth.height() as usize);
    let mut out = format!("Pf\n{} {}\n-1.0\n", w, h).into_bytes();
    out.reserve(w * h * 4);
    for row in (0..h).rev() {
        for &d in &depth.depths()[row * w..(row + 1) * w] {
            out.extend_from_slice(&d.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DepthMap> {
    let mut cur = HeaderCursor::new(bytes, FORMAT);
    let (off, magic) = cur.token()?;
    match magic {
        "Pf" => {}
        "PF" => return Err(cur.error(off, "color PFM (PF) is not a depth map; expected Pf")),
        _ => return Err(cur.error(off, format!("bad magic '{magic}', expected Pf"))),
    }
    let (woff, width): (_, u32) = cur.parse("width")?;
    let (hoff, height): (_, u32) = cur.parse("height")?;
    if width == 0 {
        return Err(cur.error(woff, "width must be positive"));
    }
    if height == 0 {
        return Err(cur.error(hoff, "height must be positive"));
    }
    let (soff, scale): (_, f64) = cur.parse("scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(cur.error(soff, format!("invalid scale {scale}")));
    }
    let little_endian = scale < 0.0;
    cur.single_whitespace()?;
    let (w, h) = (width as usize, height as usize);
    let n = w * h * 4;
    let data = &bytes[cur.pos..];
    if data.len() < n {
        return Err(cur.error(bytes.len(), format!("truncated raster: need {n} bytes, have {}", data.len())));
    }
    if data.len() > n {
        return Err(cur.error(cur.pos + n, "trailing bytes after raster"));
    }
    let mut depths = vec![0.0f32; w * h];
    for (i, chunk) in data.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (file_row, col) = (i / w, i % w);
        depths[(h - 1 - file_row) * w + col] = v;
    }
    DepthMap::new(width, height, depths)
}

pub fn write_pfm(path: &Path, depth: &DepthMap) -> Result<()> {
    super::write_bytes(path, &encode_pfm(depth))
}

pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    decode_pfm(&super::read_bytes(path)?)
}
