use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reported for identical inputs instead of +∞.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsnrMode {
    #[default]
    Plain,
    /// Each pixel of `a` is compared with the best-matching pixel of `b` within ±1 px.
    /// Not symmetric in its arguments.
    ShiftTolerant,
}

/// `10·log10(255² / MSE)` over masked pixels and all three channels, capped at
/// [`PSNR_CAP_DB`].
pub fn masked_psnr(a: &RgbImage, b: &RgbImage, mask: &[bool], mode: PsnrMode) -> Result<f64> {
    if a.dimensions() != b.dimensions() || mask.len() != (a.width() * a.height()) as usize {
        return Err(Error::GeometryMismatch("images and mask differ in size".into()));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let (w, h) = (a.width() as i64, a.height() as i64);
    let sq = |p: [u8; 3], q: [u8; 3]| -> u64 { (0..3).map(|k| (p[k] as i64 - q[k] as i64).pow(2) as u64).sum() };
    let mut total: u64 = 0;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (x, y) = (i as i64 % w, i as i64 / w);
        let pa = a.get_pixel(x as u32, y as u32).0;
        total += match mode {
            PsnrMode::Plain => sq(pa, b.get_pixel(x as u32, y as u32).0),
            PsnrMode::ShiftTolerant => {
                let mut best = u64::MAX;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (xx, yy) = (x + dx, y + dy);
                        if xx >= 0 && yy >= 0 && xx < w && yy < h {
                            best = best.min(sq(pa, b.get_pixel(xx as u32, yy as u32).0));
                        }
                    }
                }
                best
            }
        };
    }
    if total == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = total as f64 / (3 * count) as f64;
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use proptest::prelude::*;

    fn img(w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| Rgb(f(x, y)))
    }

    #[test]
    fn identical_is_capped() {
        let a = img(4, 4, |x, y| [x as u8, y as u8, 9]);
        assert_eq!(masked_psnr(&a, &a, &[true; 16], PsnrMode::Plain).unwrap(), 99.0);
    }

    #[test]
    fn one_level_everywhere() {
        let a = img(8, 8, |_, _| [100, 100, 100]);
        let b = img(8, 8, |_, _| [101, 99, 101]);
        let got = masked_psnr(&a, &b, &[true; 64], PsnrMode::Plain).unwrap();
        assert!((got - 48.13080360867911).abs() < 1e-12);
    }

    #[test]
    fn mask_selects_pixels() {
        let a = img(2, 1, |_, _| [0, 0, 0]);
        let b = img(2, 1, |x, _| if x == 0 { [0, 0, 0] } else { [255, 255, 255] });
        assert_eq!(masked_psnr(&a, &b, &[true, false], PsnrMode::Plain).unwrap(), 99.0);
        assert_eq!(masked_psnr(&a, &b, &[false, true], PsnrMode::Plain).unwrap(), 0.0);
        assert!(matches!(
            masked_psnr(&a, &b, &[false, false], PsnrMode::Plain),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn shift_tolerance_forgives_one_pixel_offsets() {
        let a = img(16, 16, |x, y| [(x * 13) as u8, (y * 7) as u8, 0]);
        let b = img(16, 16, |x, y| [((x + 1) * 13) as u8, (y * 7) as u8, 0]);
        let mask: Vec<bool> = (0..256).map(|i| i % 16 > 0).collect();
        assert!(masked_psnr(&a, &b, &mask, PsnrMode::Plain).unwrap() < 40.0);
        assert_eq!(masked_psnr(&a, &b, &mask, PsnrMode::ShiftTolerant).unwrap(), 99.0);
    }

    proptest! {
        #[test]
        fn symmetric(seed in any::<u64>()) {
            let a = img(6, 5, |x, y| [(seed >> (x + y)) as u8, x as u8 * 40, y as u8]);
            let b = img(6, 5, |x, y| [(seed >> (2 * x)) as u8, y as u8 * 3, (x * y) as u8]);
            let mask: Vec<bool> = (0..30).map(|i| (seed >> (i % 64)) & 1 == 1 || i == 0).collect();
            prop_assert_eq!(
                masked_psnr(&a, &b, &mask, PsnrMode::Plain).unwrap(),
                masked_psnr(&b, &a, &mask, PsnrMode::Plain).unwrap()
            );
        }

        #[test]
        fn decreasing_in_noise_amplitude(k in 1u8..40) {
            let a = img(8, 8, |x, y| [100 + x as u8, 100 + y as u8, 100]);
            let noisy = |amp: u8| img(8, 8, |x, y| {
                let s = if (x + y) % 2 == 0 { 1i16 } else { -1 };
                let p = a.get_pixel(x, y).0;
                p.map(|c| (c as i16 + s * amp as i16) as u8)
            });
            let mask = [true; 64];
            let lo = masked_psnr(&a, &noisy(k), &mask, PsnrMode::Plain).unwrap();
            let hi = masked_psnr(&a, &noisy(k + 1), &mask, PsnrMode::Plain).unwrap();
            prop_assert!(hi < lo);
        }
    }
}
