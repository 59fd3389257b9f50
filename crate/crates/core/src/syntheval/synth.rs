use image::RgbImage;

use crate::depthproc::DepthFrame;
use crate::error::{Error, Result};
use crate::geometry::{backproject, project, CameraModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub image: RgbImage,
    /// Pixels that received at least one sample.
    pub coverage: Vec<bool>,
}

impl SynthesisResult {
    pub fn covered(&self) -> usize {
        self.coverage.iter().filter(|&&c| c).count()
    }
}

/// Forward-warps a center RGBD frame into `target`.
///
/// First every valid center pixel is projected and z-buffered onto its nearest target
/// pixel. Then each in-view sample is splatted as a square of Chebyshev radius
/// `splat_radius_px`, z-buffered, into the pixels the first pass left empty. Directly
/// hit pixels are never overwritten by splats, so `target == center` reproduces the
/// input exactly and coverage grows monotonically with the radius.
pub fn synthesize_view(
    center_rgb: &RgbImage,
    center_depth: &DepthFrame,
    center_cam: &CameraModel,
    target: &CameraModel,
    splat_radius_px: usize,
) -> Result<SynthesisResult> {
    if (center_rgb.width() as usize, center_rgb.height() as usize) != center_cam.resolution() {
        return Err(Error::GeometryMismatch("center image does not match its camera".into()));
    }
    if center_depth.valid_count() == 0 {
        return Err(Error::EmptyDepth);
    }
    let cloud = backproject(center_depth, center_cam)?;
    let proj = project(&cloud, target);
    let (w, h) = target.resolution();
    let color = |i: usize| {
        let (x, y) = cloud.points[i].source_pixel;
        center_rgb.get_pixel(x, y).0
    };
    let mut image = RgbImage::new(w as u32, h as u32);
    let mut coverage = vec![false; w * h];
    for (t, &i) in proj.index_image.iter().enumerate() {
        if i != crate::geometry::Projection::EMPTY {
            coverage[t] = true;
            image.get_pixel_mut((t % w) as u32, (t / w) as u32).0 = color(i as usize);
        }
    }
    if splat_radius_px > 0 {
        let r = splat_radius_px;
        let mut zbuf = vec![f64::INFINITY; w * h];
        let mut winner = vec![u32::MAX; w * h];
        for (i, p) in proj.pixels.iter().enumerate() {
            if !proj.in_view[i] {
                continue;
            }
            let (x, y) = target.pixel_of(p.u, p.v).expect("in view");
            for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    let t = yy * w + xx;
                    if !coverage[t] && p.z < zbuf[t] {
                        zbuf[t] = p.z;
                        winner[t] = i as u32;
                    }
                }
            }
        }
        for (t, &i) in winner.iter().enumerate() {
            if i != u32::MAX {
                coverage[t] = true;
                image.get_pixel_mut((t % w) as u32, (t / w) as u32).0 = color(i as usize);
            }
        }
    }
    Ok(SynthesisResult { image, coverage })
}
