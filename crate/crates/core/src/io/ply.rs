//! Binary little-endian PLY point clouds.
//!
//! Vertex layout: `float x, y, z; uchar red, green, blue; float confidence`.
//! Colors are quantized to 8 bits on write.

use std::path::Path;

use nalgebra::Vector3;

use super::HeaderCursor;
use crate::error::Result;
use crate::types::PointCloud;

const FORMAT: &str = "PLY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    Float,
    UChar,
}

impl Scalar {
    fn size(self) -> usize {
        match self {
            Scalar::Float => 4,
            Scalar::UChar => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    X,
    Y,
    Z,
    Red,
    Green,
    Blue,
    Confidence,
}

impl Field {
    fn parse(name: &str) -> Option<(Field, Scalar)> {
        Some(match name {
            "x" => (Field::X, Scalar::Float),
            "y" => (Field::Y, Scalar::Float),
            "z" => (Field::Z, Scalar::Float),
            "red" => (Field::Red, Scalar::UChar),
            "green" => (Field::Green, Scalar::UChar),
            "blue" => (Field::Blue, Scalar::UChar),
            "confidence" => (Field::Confidence, Scalar::Float),
            _ => return None,
        })
    }
}

fn parse_scalar(name: &str) -> Option<Scalar> {
    match name {
        "float" | "float32" => Some(Scalar::Float),
        "uchar" | "uint8" => Some(Scalar::UChar),
        _ => None,
    }
}

pub fn encode_ply(cloud: &PointCloud) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n\
         property float confidence\nend_header\n",
        cloud.len()
    );
    let mut out = header.into_bytes();
    out.reserve(cloud.len() * 19);
    for ((p, c), conf) in cloud.positions().iter().zip(cloud.colors()).zip(cloud.confidences()) {
        for v in p.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out.extend(c.iter().map(|&ch| (ch.clamp(0.0, 1.0) * 255.0).round() as u8));
        out.extend_from_slice(&conf.to_le_bytes());
    }
    out
}

pub fn decode_ply(bytes: &[u8]) -> Result<PointCloud> {
    let mut cur = HeaderCursor::new(bytes, FORMAT);
    let (off, magic) = cur.line()?;
    if magic != "ply" {
        return Err(cur.error(off, "bad magic, expected 'ply'"));
    }
    let mut format_seen = false;
    let mut count: Option<usize> = None;
    let mut fields: Vec<(Field, Scalar)> = Vec::new();
    loop {
        let (off, line) = cur.line()?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                if parts.next() != Some("binary_little_endian") || parts.next() != Some("1.0") {
                    return Err(cur.error(off, format!("unsupported format line '{line}'")));
                }
                format_seen = true;
            }
            Some("element") => {
                if count.is_some() {
                    return Err(cur.error(off, "only a single 'vertex' element is supported"));
                }
                if parts.next() != Some("vertex") {
                    return Err(cur.error(off, format!("unsupported element in '{line}'")));
                }
                let n = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| cur.error(off, format!("invalid vertex count in '{line}'")))?;
                count = Some(n);
            }
            Some("property") => {
                if count.is_none() {
                    return Err(cur.error(off, "property before element declaration"));
                }
                let ty = parts.next().unwrap_or_default();
                let name = parts.next().unwrap_or_default();
                let scalar = parse_scalar(ty).ok_or_else(|| cur.error(off, format!("unsupported property type '{ty}'")))?;
                let (field, expected) = Field::parse(name).ok_or_else(|| cur.error(off, format!("unknown property '{name}'")))?;
                if scalar != expected {
                    return Err(cur.error(off, format!("property '{name}' has type '{ty}'")));
                }
                if fields.iter().any(|(f, _)| *f == field) {
                    return Err(cur.error(off, format!("duplicate property '{name}'")));
                }
                fields.push((field, scalar));
            }
            Some("end_header") => break,
            Some(other) => return Err(cur.error(off, format!("unexpected header keyword '{other}'"))),
        }
    }
    let header_end = cur.pos;
    if !format_seen {
        return Err(cur.error(header_end, "missing format line"));
    }
    let count = count.ok_or_else(|| cur.error(header_end, "missing 'element vertex' line"))?;
    for field in [Field::X, Field::Y, Field::Z, Field::Red, Field::Green, Field::Blue, Field::Confidence] {
        if !fields.iter().any(|(f, _)| *f == field) {
            return Err(cur.error(header_end, format!("missing property {field:?}")));
        }
    }
    let stride: usize = fields.iter().map(|(_, s)| s.size()).sum();
    let data = &bytes[header_end..];
    let needed = count
        .checked_mul(stride)
        .ok_or_else(|| cur.error(header_end, "vertex count overflows"))?;
    if data.len() < needed {
        return Err(cur.error(
            bytes.len(),
            format!("truncated vertex data: header declares {count} vertices ({needed} bytes), have {}", data.len()),
        ));
    }
    if data.len() > needed {
        return Err(cur.error(header_end + needed, "trailing bytes after vertex data"));
    }

    let mut cloud = PointCloud::with_capacity(count);
    for (i, rec) in data.chunks_exact(stride.max(1)).take(count).enumerate() {
        let mut pos = [0f32; 3];
        let mut rgb = [0f32; 3];
        let mut conf = 0f32;
        let mut at = 0;
        for (field, scalar) in &fields {
            let base = header_end + i * stride + at;
            match scalar {
                Scalar::Float => {
                    let v = f32::from_le_bytes(rec[at..at + 4].try_into().expect("4-byte slice"));
                    match field {
                        Field::X => pos[0] = v,
                        Field::Y => pos[1] = v,
                        Field::Z => pos[2] = v,
                        _ => conf = v,
                    }
                    if !v.is_finite() {
                        return Err(cur.error(base, format!("vertex {i}: non-finite {field:?}")));
                    }
                    if *field == Field::Confidence && v < 0.0 {
                        return Err(cur.error(base, format!("vertex {i}: negative confidence {v}")));
                    }
                }
                Scalar::UChar => {
                    let v = rec[at] as f32 / 255.0;
                    match field {
                        Field::Red => rgb[0] = v,
                        Field::Green => rgb[1] = v,
                        _ => rgb[2] = v,
                    }
                }
            }
            at += scalar.size();
        }
        cloud.push(Vector3::new(pos[0] as f64, pos[1] as f64, pos[2] as f64), rgb, conf);
    }
    Ok(cloud)
}

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    super::write_bytes(path, &encode_ply(cloud))
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    decode_ply(&super::read_bytes(path)?)
}
