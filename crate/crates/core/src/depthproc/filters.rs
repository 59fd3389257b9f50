use crate::depthproc::{DepthConfig, DepthFrame, FilterOrder, MISSING};
use crate::error::Result;
use crate::geometry::CameraModel;
use crate::par;

/// Camera-frame point per pixel; `None` where depth is missing.
fn camera_points(depth: &DepthFrame, cam: &CameraModel) -> Vec<Option<[f64; 3]>> {
    let w = depth.width();
    par::map_indexed(depth.len(), |i| {
        let d = depth.values()[i];
        (d != MISSING).then(|| {
            let p = cam.pixel_to_camera((i % w) as f64, (i / w) as f64, d as f64 * cam.depth_scale);
            [p.x, p.y, p.z]
        })
    })
}

fn prepare(depth: &DepthFrame, cam: &CameraModel, cfg: &DepthConfig) -> Result<Vec<Option<[f64; 3]>>> {
    cfg.validate()?;
    cam.check_intrinsics()?;
    depth.require_same_size(cam.resolution(), "camera")?;
    Ok(camera_points(depth, cam))
}

#[inline]
fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    dx * dx + dy * dy + dz * dz
}

/// Removes valid pixels whose 3D point lies farther from its window centroid than
/// `μ + n_std·σ` of the window's centroid distances.
///
/// Only pixels whose whole window lies inside the frame are tested; pixels within
/// `window/2` of the border pass through. Reads the input only, so the result does not
/// depend on visiting order.
pub fn statistical_outlier_filter(depth: &DepthFrame, cam: &CameraModel, cfg: &DepthConfig) -> Result<DepthFrame> {
    let pts = prepare(depth, cam, cfg)?;
    let (w, h) = (depth.width(), depth.height());
    let r = cfg.window / 2;
    let mut out = depth.clone();
    if w <= 2 * r || h <= 2 * r {
        return Ok(out);
    }
    par::for_each_chunk_mut(out.values_mut(), w, |y, row| {
        if y < r || y + r >= h {
            return;
        }
        let mut nb: Vec<[f64; 3]> = Vec::with_capacity(cfg.window * cfg.window);
        for x in r..w - r {
            let Some(center) = pts[y * w + x] else {
                continue;
            };
            nb.clear();
            for yy in y - r..=y + r {
                nb.extend(pts[yy * w + x - r..=yy * w + x + r].iter().flatten());
            }
            let n = nb.len() as f64;
            let mut c = [0.0; 3];
            for p in &nb {
                c[0] += p[0];
                c[1] += p[1];
                c[2] += p[2];
            }
            c = c.map(|v| v / n);
            let mean = nb.iter().map(|p| dist(p, &c)).sum::<f64>() / n;
            let var = nb.iter().map(|p| (dist(p, &c) - mean).powi(2)).sum::<f64>() / n;
            if dist(&center, &c) > mean + cfg.n_std * var.sqrt() {
                row[x] = MISSING;
            }
        }
    });
    Ok(out)
}

/// Removes valid pixels with no other valid window neighbor within `radius_m` in 3D.
/// Windows are clipped at the frame border.
pub fn radius_outlier_filter(depth: &DepthFrame, cam: &CameraModel, cfg: &DepthConfig) -> Result<DepthFrame> {
    let pts = prepare(depth, cam, cfg)?;
    let (w, h) = (depth.width(), depth.height());
    let r = cfg.window / 2;
    let r2 = cfg.radius_m * cfg.radius_m;
    let mut out = depth.clone();
    par::for_each_chunk_mut(out.values_mut(), w, |y, row| {
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
        for x in 0..w {
            let Some(center) = pts[y * w + x] else {
                continue;
            };
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
            let supported = (y0..=y1).any(|yy| {
                (x0..=x1).any(|xx| (xx, yy) != (x, y) && pts[yy * w + xx].is_some_and(|p| dist2(&p, &center) <= r2))
            });
            if !supported {
                row[x] = MISSING;
            }
        }
    });
    Ok(out)
}

/// Runs the enabled outlier filters in `cfg.order`; disabled filters are skipped.
pub fn remove_outliers(
    depth: &DepthFrame,
    cam: &CameraModel,
    cfg: &DepthConfig,
    statistical: bool,
    radius: bool,
) -> Result<DepthFrame> {
    let stat = |d: &DepthFrame| {
        if statistical {
            statistical_outlier_filter(d, cam, cfg)
        } else {
            Ok(d.clone())
        }
    };
    let rad = |d: &DepthFrame| {
        if radius {
            radius_outlier_filter(d, cam, cfg)
        } else {
            Ok(d.clone())
        }
    };
    match cfg.order {
        FilterOrder::StatisticalFirst => rad(&stat(depth)?),
        FilterOrder::RadiusFirst => stat(&rad(depth)?),
    }
}

/// Averages with the previous frame where both are valid and differ by less than
/// `threshold_mm`; keeps the current sample otherwise. Halves round up.
pub fn temporal_filter(current: &DepthFrame, previous: Option<&DepthFrame>, threshold_mm: u32) -> Result<DepthFrame> {
    let Some(prev) = previous else {
        return Ok(current.clone());
    };
    current.require_same_size((prev.width(), prev.height()), "previous frame")?;
    let values = current
        .values()
        .iter()
        .zip(prev.values())
        .map(|(&c, &p)| {
            if c != MISSING && p != MISSING && (c as u32).abs_diff(p as u32) < threshold_mm {
                (c as u32 + p as u32).div_ceil(2) as u16
            } else {
                c
            }
        })
        .collect();
    DepthFrame::new(current.width(), current.height(), values)
}
