//! Binary PPM (P6, maxval 255).

use std::path::Path;

use super::HeaderCursor;
use crate::error::Result;
use crate::types::Image;

const FORMAT: &str = "PPM";

#[inline]
fn quantize(c: f32) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.reserve(image.pixels().len() * 3);
    for p in image.pixels() {
        out.extend(p.iter().map(|&c| quantize(c)));
    }
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let mut cur = HeaderCursor::new(bytes, FORMAT);
    let (off, magic) = cur.token()?;
    if magic != "P6" {
        return Err(cur.error(off, format!("bad magic '{magic}', expected P6")));
    }
    let (woff, width): (_, u32) = cur.parse("width")?;
    let (hoff, height): (_, u32) = cur.parse("height")?;
    if width == 0 {
        return Err(cur.error(woff, "width must be positive"));
    }
    if height == 0 {
        return Err(cur.error(hoff, "height must be positive"));
    }
    let (moff, maxval): (_, u32) = cur.parse("maxval")?;
    if maxval != 255 {
        return Err(cur.error(moff, format!("unsupported maxval {maxval}, expected 255")));
    }
    cur.single_whitespace()?;
    let n = width as usize * height as usize * 3;
    let data = &bytes[cur.pos..];
    if data.len() < n {
        return Err(cur.error(bytes.len(), format!("truncated pixel data: need {n} bytes, have {}", data.len())));
    }
    if data.len() > n {
        return Err(cur.error(cur.pos + n, "trailing bytes after pixel data"));
    }
    let pixels = data
        .chunks_exact(3)
        .map(|c| [c[0] as f32 / 255.0, c[1] as f32 / 255.0, c[2] as f32 / 255.0])
        .collect();
    Image::new(width, height, pixels)
}

pub fn write_ppm(path: &Path, image: &Image) -> Result<()> {
    super::write_bytes(path, &encode_ppm(image))
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    decode_ppm(&super::read_bytes(path)?)
}

/// Binary mask as an image: white where set, black elsewhere.
pub fn mask_to_image(width: u32, height: u32, mask: &[bool]) -> Image {
    let pixels = mask.iter().map(|&m| if m { [1.0; 3] } else { [0.0; 3] }).collect();
    Image::new(width, height, pixels).expect("mask length matches dimensions")
}

/// Inverse of [`mask_to_image`]; any channel above one half counts as set.
pub fn image_to_mask(image: &Image) -> Vec<bool> {
    image.pixels().iter().map(|p| p.iter().any(|&c| c > 0.5)).collect()
}

pub fn write_mask_ppm(path: &Path, width: u32, height: u32, mask: &[bool]) -> Result<()> {
    write_ppm(path, &mask_to_image(width, height, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn round_trip_is_exact_for_8bit_values() {
        let pixels: Vec<_> = (0..12u32).map(|i| [i as f32 / 255.0, (255 - i) as f32 / 255.0, 0.5_f32.min(1.0)]).collect();
        let img = Image::new(4, 3, pixels).unwrap();
        let back = decode_ppm(&encode_ppm(&img)).unwrap();
        assert_eq!(encode_ppm(&back), encode_ppm(&img));
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert_eq!(a[0], b[0]);
            assert_eq!(a[1], b[1]);
            assert!((a[2] - b[2]).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn header_with_comments_parses() {
        let mut bytes = b"P6\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([255, 0, 0, 0, 255, 0]);
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!(img.get(0, 0), [1.0, 0.0, 0.0]);
        assert_eq!(img.get(1, 0), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_malformed_input() {
        let err = decode_ppm(b"P5\n1 1\n255\n\0").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");
        let err = decode_ppm(b"P6\n2 2\n255\n\0\0\0").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 14, .. }), "{err}");
        let err = decode_ppm(b"P6\n1 1\n65535\n\0\0\0").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 7, .. }), "{err}");
        let err = decode_ppm(b"P6\n1 x\n255\n").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 5, .. }), "{err}");
    }

    #[test]
    fn mask_round_trip() {
        let mask = vec![true, false, false, true, true, false];
        let img = mask_to_image(3, 2, &mask);
        let back = decode_ppm(&encode_ppm(&img)).unwrap();
        assert_eq!(image_to_mask(&back), mask);
    }
}
