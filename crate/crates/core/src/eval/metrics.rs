//! PSNR and SSIM on `[0, 1]` images.

use crate::error::{Error, Result};
use crate::types::Image;

/// Returned for identical inputs instead of infinity.
pub const PSNR_CAP: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Dimension(format!(
            "images are {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// PSNR with peak 1 over all channels of the (optionally masked) pixels.
pub fn psnr(a: &Image, b: &Image, mask: Option<&[bool]>) -> Result<f64> {
    check_dims(a, b)?;
    if let Some(m) = mask {
        if m.len() != a.pixels().len() {
            return Err(Error::Dimension(format!("mask has {} entries for {} pixels", m.len(), a.pixels().len())));
        }
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, (pa, pb)) in a.pixels().iter().zip(b.pixels()).enumerate() {
        if mask.is_some_and(|m| !m[k]) {
            continue;
        }
        for c in 0..3 {
            let d = pa[c] as f64 - pb[c] as f64;
            sum += d * d;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("PSNR mask selects no pixels"));
    }
    Ok(psnr_from_mse(sum / (3 * count) as f64))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

/// Rec.601 luma.
pub fn luma(image: &Image) -> Vec<f64> {
    image
        .pixels()
        .iter()
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - half;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.map(|t| t / s)
}

/// Valid-mode separable filtering; output is `(w - 10) x (h - 10)`.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| taps[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| taps[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Local SSIM at every valid window position, row-major over `(w - 10) x (h - 10)`.
pub fn ssim_map(a: &Image, b: &Image) -> Result<(Vec<f64>, usize, usize)> {
    check_dims(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Dimension(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}")));
    }
    let (la, lb) = (luma(a), luma(b));
    let aa: Vec<f64> = la.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = lb.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();
    let taps = gaussian_taps();
    let [mu_a, mu_b, e_aa, e_bb, e_ab] = [&la, &lb, &aa, &bb, &ab].map(|s| filter_valid(s, w, h, &taps));
    let map = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
        })
        .collect();
    Ok((map, w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW))
}

/// Mean SSIM over all valid window positions.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    let (map, _, _) = ssim_map(a, b)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// Mean SSIM over windows whose center pixel is selected by `mask`;
/// `None` when no such window exists.
pub fn ssim_masked(a: &Image, b: &Image, mask: &[bool]) -> Result<Option<f64>> {
    if mask.len() != a.pixels().len() {
        return Err(Error::Dimension(format!("mask has {} entries for {} pixels", mask.len(), a.pixels().len())));
    }
    let (map, mw, mh) = ssim_map(a, b)?;
    let w = a.width() as usize;
    let half = SSIM_WINDOW / 2;
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..mh {
        for x in 0..mw {
            if mask[(y + half) * w + x + half] {
                sum += map[y * mw + x];
                n += 1;
            }
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Image {
        let px = (0..w * h)
            .map(|_| [rng.random_range(0.0f32..=1.0), rng.random_range(0.0f32..=1.0), rng.random_range(0.0f32..=1.0)])
            .collect();
        Image::new(w, h, px).unwrap()
    }

    /// Direct 2-D window sums, no separability.
    fn ssim_reference(a: &Image, b: &Image) -> f64 {
        let (w, h) = (a.width() as usize, a.height() as usize);
        let (la, lb) = (luma(a), luma(b));
        let taps = gaussian_taps();
        let mut total = 0.0;
        let mut n = 0;
        for y0 in 0..=h - 11 {
            for x0 in 0..=w - 11 {
                let (mut ma, mut mb) = (0.0, 0.0);
                for j in 0..11 {
                    for i in 0..11 {
                        let g = taps[i] * taps[j];
                        let k = (y0 + j) * w + x0 + i;
                        ma += g * la[k];
                        mb += g * lb[k];
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for j in 0..11 {
                    for i in 0..11 {
                        let g = taps[i] * taps[j];
                        let k = (y0 + j) * w + x0 + i;
                        va += g * (la[k] - ma) * (la[k] - ma);
                        vb += g * (lb[k] - mb) * (lb[k] - mb);
                        cov += g * (la[k] - ma) * (lb[k] - mb);
                    }
                }
                let c1 = 1e-4;
                let c2 = 9e-4;
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                n += 1;
            }
        }
        total / n as f64
    }

    #[test]
    fn psnr_identical_is_capped() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_image(&mut rng, 16, 12);
        assert_eq!(psnr(&a, &a, None).unwrap(), PSNR_CAP);
    }

    #[test]
    fn psnr_uniform_error_is_20db() {
        let a = Image::filled(8, 8, [0.2; 3]);
        let b = Image::filled(8, 8, [0.3; 3]);
        // f32 storage puts the difference within ~1e-7 of 0.1
        assert!((psnr(&a, &b, None).unwrap() - 20.0).abs() < 1e-5);
    }

    #[test]
    fn psnr_errors() {
        let a = Image::black(8, 8);
        assert!(matches!(psnr(&a, &Image::black(8, 7), None), Err(Error::Dimension(_))));
        assert!(psnr(&a, &a, Some(&[false; 64])).is_err());
        assert!(psnr(&a, &a, Some(&[true; 10])).is_err());
    }

    #[test]
    fn full_mask_equals_unmasked_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_image(&mut rng, 20, 15);
        let b = random_image(&mut rng, 20, 15);
        let full = vec![true; 300];
        assert_eq!(psnr(&a, &b, Some(&full)).unwrap(), psnr(&a, &b, None).unwrap());
        assert_eq!(psnr(&a, &b, None).unwrap(), psnr(&b, &a, None).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn psnr_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_image(&mut rng, 13, 9);
            let b = random_image(&mut rng, 13, 9);
            let mask: Vec<bool> = (0..117).map(|_| rng.random_bool(0.6)).collect();
            let mut se = 0.0;
            let mut n = 0.0;
            for k in 0..117 {
                if mask[k] {
                    for c in 0..3 {
                        se += (a.pixels()[k][c] as f64 - b.pixels()[k][c] as f64).powi(2);
                        n += 1.0;
                    }
                }
            }
            let expect = 10.0 * (n / se).log10();
            assert!((psnr(&a, &b, Some(&mask)).unwrap() - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn psnr_decreases_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = Image::filled(64, 64, [0.5; 3]);
        let mut last = f64::INFINITY;
        for sigma in [0.01, 0.02, 0.04, 0.08, 0.16] {
            let n = Normal::new(0.0, sigma).unwrap();
            let px = base
                .pixels()
                .iter()
                .map(|p| p.map(|c| (c as f64 + n.sample(&mut rng)).clamp(0.0, 1.0) as f32))
                .collect();
            let noisy = Image::new(64, 64, px).unwrap();
            let v = psnr(&base, &noisy, None).unwrap();
            assert!(v < last, "sigma {sigma}: {v} !< {last}");
            last = v;
        }
    }

    #[test]
    fn ssim_identical_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_image(&mut rng, 24, 16);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ssim_negative_is_below_zero() {
        // checkerboard of 0.1 / 0.9 and its inverse; no mid-gray present
        let px: Vec<_> = (0..32 * 32)
            .map(|k| if ((k % 32) / 2 + (k / 32) / 2) % 2 == 0 { [0.1f32; 3] } else { [0.9; 3] })
            .collect();
        let a = Image::new(32, 32, px.clone()).unwrap();
        let b = Image::new(32, 32, px.iter().map(|p| p.map(|c| 1.0 - c)).collect()).unwrap();
        assert!(ssim(&a, &b).unwrap() < 0.0);
    }

    #[test]
    fn ssim_constant_offset_matches_reference() {
        let a = Image::filled(16, 16, [0.4; 3]);
        let b = Image::filled(16, 16, [0.5; 3]);
        let expect = ssim_reference(&a, &b);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-6);
        // constant images: only the luminance term differs from 1
        let (ma, mb) = (0.4f32 as f64, 0.5f32 as f64);
        let closed = (2.0 * ma * mb + 1e-4) / (ma * ma + mb * mb + 1e-4);
        assert!((ssim(&a, &b).unwrap() - closed).abs() < 1e-6);
    }

    #[test]
    fn ssim_errors() {
        let a = Image::black(10, 20);
        assert!(ssim(&a, &a).is_err());
        assert!(ssim(&Image::black(12, 12), &Image::black(12, 13)).is_err());
    }

    #[test]
    fn masked_ssim_full_mask_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_image(&mut rng, 20, 14);
        let b = random_image(&mut rng, 20, 14);
        let full = ssim_masked(&a, &b, &vec![true; 280]).unwrap().unwrap();
        assert!((full - ssim(&a, &b).unwrap()).abs() < 1e-12);
        assert_eq!(ssim_masked(&a, &b, &vec![false; 280]).unwrap(), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn ssim_matches_reference(seed in any::<u64>(), w in 11u32..24, h in 11u32..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_image(&mut rng, w, h);
            let b = random_image(&mut rng, w, h);
            let s = ssim(&a, &b).unwrap();
            prop_assert!((s - ssim_reference(&a, &b)).abs() < 1e-6);
            prop_assert!((-1.0..=1.0).contains(&s));
        }
    }
}
