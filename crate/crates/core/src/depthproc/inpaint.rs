use image::RgbImage;

use crate::depthproc::{DepthFrame, InpaintConfig, MISSING};
use crate::error::{Error, Result};
use crate::par;

/// Minimum best range weight for a pixel to be filled in a similarity-gated pass.
const SIMILARITY_GATE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintResult {
    pub depth: DepthFrame,
    pub passes: usize,
    pub filled: usize,
    /// Pixels still missing: unreachable, or left over when `max_passes` ran out.
    pub remaining: usize,
    /// The input had no valid sample, so nothing could be filled.
    pub no_valid_input: bool,
}

/// Fills missing pixels by iterated joint-bilateral averaging guided by `rgb`.
///
/// Each pass reads the state left by the previous one. A pass fills only pixels that
/// have a window neighbor of similar color (range weight at least 0.5); when such a pass
/// fills nothing, one ungated pass lets the fill cross color edges. Passes stop when
/// nothing changes or after `max_passes`. Valid input pixels are never modified.
pub fn inpaint(depth: &DepthFrame, rgb: &RgbImage, cfg: &InpaintConfig) -> Result<InpaintResult> {
    depth.require_same_size((rgb.width() as usize, rgb.height() as usize), "rgb guide")?;
    if !(cfg.sigma_spatial_px > 0.0 && cfg.sigma_range_color > 0.0 && cfg.max_passes > 0) {
        return Err(Error::InvalidInput(
            "inpaint sigmas and max_passes must be positive".into(),
        ));
    }
    let (w, h) = (depth.width(), depth.height());
    let mut pending: Vec<usize> = (0..depth.len()).filter(|&i| depth.values()[i] == MISSING).collect();
    let no_valid_input = pending.len() == depth.len() && !pending.is_empty();
    let mut out = depth.clone();
    let mut passes = 0;
    let mut filled = 0;
    if no_valid_input {
        log::warn!("inpaint: frame has no valid depth, returned unchanged");
    }

    let r = cfg.radius() as isize;
    let offsets: Vec<(isize, isize, f64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&o| o != (0, 0))
        .map(|(dx, dy)| {
            let d2 = (dx * dx + dy * dy) as f64;
            (dx, dy, (-d2 / (2.0 * cfg.sigma_spatial_px.powi(2))).exp())
        })
        .collect();
    let inv_2sr2 = 1.0 / (2.0 * cfg.sigma_range_color.powi(2));
    let guide = rgb.as_raw();

    let candidate = |state: &[u16], i: usize, gated: bool| -> Option<u16> {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        let c0 = &guide[3 * i..3 * i + 3];
        let (mut num, mut den, mut best) = (0.0, 0.0, 0.0f64);
        let (mut num_s, mut den_s) = (0.0, 0.0);
        for &(dx, dy, ws) in &offsets {
            let (xx, yy) = (x + dx, y + dy);
            if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                continue;
            }
            let j = yy as usize * w + xx as usize;
            let d = state[j];
            if d == MISSING {
                continue;
            }
            let c1 = &guide[3 * j..3 * j + 3];
            let dc2: f64 = (0..3).map(|k| (c0[k] as f64 - c1[k] as f64).powi(2)).sum();
            let wr = (-dc2 * inv_2sr2).exp();
            best = best.max(wr);
            num += ws * wr * d as f64;
            den += ws * wr;
            num_s += ws * d as f64;
            den_s += ws;
        }
        if den_s == 0.0 || (gated && best < SIMILARITY_GATE) {
            return None;
        }
        let v = if den > 0.0 { num / den } else { num_s / den_s };
        Some(v.round().clamp(1.0, u16::MAX as f64) as u16)
    };

    let mut gated = true;
    while !pending.is_empty() && passes < cfg.max_passes {
        passes += 1;
        let state = out.values();
        let fills = par::map_slice(&pending, |&i| candidate(state, i, gated));
        let count = fills.iter().flatten().count();
        if count == 0 {
            if !gated {
                break;
            }
            gated = false;
            continue;
        }
        gated = true;
        filled += count;
        let vals = out.values_mut();
        let mut keep = Vec::with_capacity(pending.len() - count);
        for (&i, f) in pending.iter().zip(&fills) {
            match f {
                Some(v) => vals[i] = *v,
                None => keep.push(i),
            }
        }
        pending = keep;
    }
    Ok(InpaintResult {
        depth: out,
        passes,
        filled,
        remaining: pending.len(),
        no_valid_input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn flat_rgb(w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb([90, 60, 30]))
    }

    #[test]
    fn constant_surround_fills_exactly() {
        let mut d = DepthFrame::filled(9, 9, 612);
        d.set(4, 4, 0);
        let r = inpaint(&d, &flat_rgb(9, 9), &InpaintConfig::default()).unwrap();
        assert_eq!(r.depth, DepthFrame::filled(9, 9, 612));
        assert_eq!((r.filled, r.remaining, r.passes), (1, 0, 1));
    }

    #[test]
    fn nothing_missing_is_a_no_op() {
        let d = DepthFrame::new(3, 1, vec![400, 500, 600]).unwrap();
        let r = inpaint(&d, &flat_rgb(3, 1), &InpaintConfig::default()).unwrap();
        assert_eq!(r.depth, d);
        assert_eq!(r.passes, 0);
    }

    #[test]
    fn all_missing_sets_the_flag() {
        let d = DepthFrame::filled(5, 5, 0);
        let r = inpaint(&d, &flat_rgb(5, 5), &InpaintConfig::default()).unwrap();
        assert!(r.no_valid_input);
        assert_eq!(r.depth, d);
        assert_eq!(r.remaining, 25);
    }

    #[test]
    fn wide_hole_fills_over_several_passes() {
        let mut d = DepthFrame::filled(40, 5, 700);
        for x in 5..35 {
            for y in 0..5 {
                d.set(x, y, 0);
            }
        }
        let r = inpaint(&d, &flat_rgb(40, 5), &InpaintConfig::default()).unwrap();
        assert_eq!(r.remaining, 0);
        assert!(r.passes > 1);
        assert!(r.depth.values().iter().all(|&v| v == 700));
    }

    #[test]
    fn fill_does_not_cross_a_color_edge() {
        // left half near and red, right half far and blue, a hole straddling the edge
        let (w, h) = (20u32, 8u32);
        let rgb = RgbImage::from_fn(w, h, |x, _| if x < 10 { Rgb([200, 0, 0]) } else { Rgb([0, 0, 200]) });
        let mut d = DepthFrame::new(
            w as usize,
            h as usize,
            (0..w * h).map(|i| if i % w < 10 { 400 } else { 800 }).collect(),
        )
        .unwrap();
        for y in 2..6 {
            for x in 7..13 {
                d.set(x, y, 0);
            }
        }
        let r = inpaint(&d, &rgb, &InpaintConfig::default()).unwrap();
        for y in 2..6 {
            for x in 7..13 {
                assert_eq!(r.depth.get(x, y), if x < 10 { 400 } else { 800 });
            }
        }
    }

    #[test]
    fn ungated_pass_bridges_new_colors() {
        let rgb = RgbImage::from_fn(6, 1, |x, _| if x < 3 { Rgb([0, 0, 0]) } else { Rgb([255, 255, 255]) });
        let d = DepthFrame::new(6, 1, vec![500, 500, 500, 0, 0, 0]).unwrap();
        let r = inpaint(&d, &rgb, &InpaintConfig::default()).unwrap();
        assert_eq!(r.remaining, 0);
        assert!(r.depth.values().iter().all(|&v| v == 500));
    }

    #[test]
    fn geometry_mismatch() {
        assert!(inpaint(&DepthFrame::filled(3, 3, 1), &flat_rgb(2, 3), &InpaintConfig::default()).is_err());
    }
}
