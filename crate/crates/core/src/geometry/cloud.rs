use image::RgbImage;
use nalgebra::Vector3;

use super::camera::{CameraModel, Rig};
use crate::depthproc::{DepthFrame, MISSING};
use crate::error::{Error, Result};
use crate::par;

/// Alpha 0 marks a point no RGB pixel saw.
pub const UNCOLORED: [u8; 4] = [0, 0, 0, 0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    /// World-frame position, meters.
    pub position: [f64; 3],
    pub rgb: [u8; 4],
    pub class_rgb: Option<[u8; 4]>,
    /// Depth-image pixel the point came from.
    pub source_pixel: (u32, u32),
}

impl Point {
    pub fn vector(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    /// Class color when `overlay` is set and present, RGB otherwise.
    pub fn display_color(&self, overlay: bool) -> [u8; 4] {
        match (overlay, self.class_rgb) {
            (true, Some(c)) => c,
            _ => self.rgb,
        }
    }
}

/// Registered points in depth-image row-major order of their source pixels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn has_class_overlay(&self) -> bool {
        self.points.iter().any(|p| p.class_rgb.is_some())
    }
}

/// Image-space location of a projected point. `s` is the homogeneous scale; for a
/// zero-skew pinhole it equals the camera-frame depth `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelDepth {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub s: f64,
}

/// Per-point projections plus the z-buffered index image.
#[derive(Debug, Clone)]
pub struct Projection {
    pub pixels: Vec<PixelDepth>,
    pub in_view: Vec<bool>,
    pub width: usize,
    pub height: usize,
    /// Winning point index per target pixel, [`Projection::EMPTY`] where none landed.
    pub index_image: Vec<u32>,
}

impl Projection {
    pub const EMPTY: u32 = u32::MAX;

    pub fn winner(&self, x: usize, y: usize) -> Option<usize> {
        let i = self.index_image[y * self.width + x];
        (i != Self::EMPTY).then_some(i as usize)
    }
}

/// Back-projects every valid depth pixel to a world point.
pub fn backproject(depth: &DepthFrame, cam: &CameraModel) -> Result<PointCloud> {
    cam.check_intrinsics()?;
    depth.require_same_size(cam.resolution(), "camera")?;
    let w = depth.width();
    let rows = par::map_indexed(depth.height(), |y| {
        let row = &depth.values()[y * w..(y + 1) * w];
        row.iter()
            .enumerate()
            .filter(|(_, &d)| d != MISSING)
            .map(|(x, &d)| {
                let pc = cam.pixel_to_camera(x as f64, y as f64, d as f64 * cam.depth_scale);
                Point {
                    position: cam.camera_to_world(&pc).into(),
                    rgb: UNCOLORED,
                    class_rgb: None,
                    source_pixel: (x as u32, y as u32),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(PointCloud { points: rows.concat() })
}

/// Projects every point into `cam` and keeps the nearest per target pixel.
///
/// Points with `s ≤ 0` or landing off the sensor are out of view. Equal depths keep
/// the lower point index.
pub fn project(cloud: &PointCloud, cam: &CameraModel) -> Projection {
    let pixels = par::map_slice(&cloud.points, |p| {
        let (u, v, s) = cam.project_world(&p.vector());
        PixelDepth { u, v, z: s, s }
    });
    let (w, h) = cam.resolution();
    let mut index_image = vec![Projection::EMPTY; w * h];
    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut in_view = vec![false; pixels.len()];
    for (i, p) in pixels.iter().enumerate() {
        if !(p.s > 0.0) {
            continue;
        }
        let Some((x, y)) = cam.pixel_of(p.u, p.v) else {
            continue;
        };
        in_view[i] = true;
        let t = y * w + x;
        if p.z < zbuf[t] {
            zbuf[t] = p.z;
            index_image[t] = i as u32;
        }
    }
    Projection {
        pixels,
        in_view,
        width: w,
        height: h,
        index_image,
    }
}

/// Bilinear color at a continuous pixel position. Coordinates within half a pixel of
/// the border are clamped to the edge samples.
pub fn sample_bilinear(img: &RgbImage, u: f64, v: f64) -> Option<[u8; 3]> {
    let (w, h) = (img.width() as f64, img.height() as f64);
    if !(u >= -0.5 && v >= -0.5 && u < w - 0.5 && v < h - 0.5) {
        return None;
    }
    let u = u.clamp(0.0, w - 1.0);
    let v = v.clamp(0.0, h - 1.0);
    let (x0, y0) = (u.floor(), v.floor());
    let (fx, fy) = (u - x0, v - y0);
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (a, b, c, d) = (
        img.get_pixel(x0, y0).0,
        img.get_pixel(x1, y0).0,
        img.get_pixel(x0, y1).0,
        img.get_pixel(x1, y1).0,
    );
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
        let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
        out[ch] = (top * (1.0 - fy) + bottom * fy).round() as u8;
    }
    Some(out)
}

fn sample_rgb(img: &RgbImage, cam: &CameraModel, p: &Vector3<f64>) -> Option<[u8; 3]> {
    let (u, v, s) = cam.project_world(p);
    if s > 0.0 {
        sample_bilinear(img, u, v)
    } else {
        None
    }
}

fn sample_nearest(img: &RgbImage, cam: &CameraModel, p: &Vector3<f64>) -> Option<[u8; 3]> {
    let (u, v, s) = cam.project_world(p);
    if !(s > 0.0) {
        return None;
    }
    cam.pixel_of(u, v).map(|(x, y)| img.get_pixel(x as u32, y as u32).0)
}

fn require_image(img: &RgbImage, cam: &CameraModel, what: &str) -> Result<()> {
    if (img.width() as usize, img.height() as usize) != cam.resolution() {
        return Err(Error::GeometryMismatch(format!(
            "{what} image is {}x{}, camera {}x{}",
            img.width(),
            img.height(),
            cam.width,
            cam.height
        )));
    }
    Ok(())
}

/// RGB resampled into the depth camera's view, with the pixels that received a color.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedRgb {
    pub image: RgbImage,
    pub mask: Vec<bool>,
}

/// Points farther than this fraction behind the nearest point on their RGB pixel are
/// treated as hidden from the RGB camera.
pub const OCCLUSION_TOLERANCE: f64 = 0.03;

/// RGB color of every point, or `None` where the RGB camera does not see it: outside
/// the image, or occluded according to a z-buffer over the cloud itself.
fn visible_colors(cloud: &PointCloud, rgb: &RgbImage, rgb_cam: &CameraModel) -> Vec<Option<[u8; 3]>> {
    let proj = project(cloud, rgb_cam);
    let w = proj.width;
    let idx: Vec<usize> = (0..cloud.len()).collect();
    par::map_slice(&idx, |&i| {
        if !proj.in_view[i] {
            return None;
        }
        let p = proj.pixels[i];
        let (x, y) = rgb_cam.pixel_of(p.u, p.v)?;
        let front = proj.pixels[proj.index_image[y * w + x] as usize].z;
        if p.z > front * (1.0 + OCCLUSION_TOLERANCE) {
            return None;
        }
        sample_bilinear(rgb, p.u, p.v)
    })
}

/// Colors every valid depth pixel by projecting it into the RGB camera.
///
/// Missing-depth, out-of-view and occluded pixels stay black with a false mask entry.
pub fn align_rgb_to_depth(
    rgb: &RgbImage,
    rgb_cam: &CameraModel,
    depth: &DepthFrame,
    depth_cam: &CameraModel,
) -> Result<AlignedRgb> {
    require_image(rgb, rgb_cam, "rgb")?;
    let cloud = backproject(depth, depth_cam)?;
    let colors = visible_colors(&cloud, rgb, rgb_cam);
    let (w, h) = depth_cam.resolution();
    let mut image = RgbImage::new(w as u32, h as u32);
    let mut mask = vec![false; w * h];
    for (p, c) in cloud.points.iter().zip(colors) {
        if let Some(c) = c {
            let (x, y) = p.source_pixel;
            image.get_pixel_mut(x, y).0 = c;
            mask[y as usize * w + x as usize] = true;
        }
    }
    Ok(AlignedRgb { image, mask })
}

/// Like [`align_rgb_to_depth`], but missing-depth pixels are also colored, using the
/// depth of the nearest valid pixel on the same row (the left one on ties). Rows without
/// any valid pixel stay black. Produces a guide image for inpainting; the mask marks
/// pixels that received a color.
pub fn align_rgb_to_depth_filled(
    rgb: &RgbImage,
    rgb_cam: &CameraModel,
    depth: &DepthFrame,
    depth_cam: &CameraModel,
) -> Result<AlignedRgb> {
    require_image(rgb, rgb_cam, "rgb")?;
    depth_cam.check_intrinsics()?;
    depth.require_same_size(depth_cam.resolution(), "camera")?;
    let (w, h) = depth_cam.resolution();
    let rows = par::map_indexed(h, |y| {
        let row = &depth.values()[y * w..(y + 1) * w];
        let mut left = vec![None; w];
        let mut last = None;
        for x in 0..w {
            if row[x] != MISSING {
                last = Some((x, row[x]));
            }
            left[x] = last;
        }
        let mut right = None;
        let mut out = vec![None; w];
        for x in (0..w).rev() {
            if row[x] != MISSING {
                right = Some((x, row[x]));
            }
            let d = match (left[x], right) {
                (Some((lx, ld)), Some((rx, rd))) => Some(if x - lx <= rx - x { ld } else { rd }),
                (Some((_, d)), None) | (None, Some((_, d))) => Some(d),
                (None, None) => None,
            };
            out[x] = d.and_then(|d| {
                let pc = depth_cam.pixel_to_camera(x as f64, y as f64, d as f64 * depth_cam.depth_scale);
                sample_rgb(rgb, rgb_cam, &depth_cam.camera_to_world(&pc))
            });
        }
        out
    });
    let mut image = RgbImage::new(w as u32, h as u32);
    let mut mask = vec![false; w * h];
    for (y, row) in rows.iter().enumerate() {
        for (x, c) in row.iter().enumerate() {
            if let Some(c) = c {
                image.get_pixel_mut(x as u32, y as u32).0 = *c;
                mask[y * w + x] = true;
            }
        }
    }
    Ok(AlignedRgb { image, mask })
}

/// Back-projects the depth frame, colors each point the RGB camera sees (occlusion-tested,
/// bilinear) and, where the hyperspectral camera sees it, attaches the class color
/// (nearest pixel, no occlusion test). Points the RGB camera misses keep [`UNCOLORED`].
pub fn register_frame(
    depth: &DepthFrame,
    rgb: &RgbImage,
    class_rgb: Option<&RgbImage>,
    rig: &Rig,
) -> Result<PointCloud> {
    require_image(rgb, &rig.rgb, "rgb")?;
    if let Some(c) = class_rgb {
        require_image(c, &rig.hs, "class")?;
    }
    let mut cloud = backproject(depth, &rig.depth)?;
    let colors = visible_colors(&cloud, rgb, &rig.rgb);
    let classes = par::map_slice(&cloud.points, |p| {
        class_rgb
            .and_then(|img| sample_nearest(img, &rig.hs, &p.vector()))
            .map(|[r, g, b]| [r, g, b, 255])
    });
    for ((p, rgb), class) in cloud.points.iter_mut().zip(colors).zip(classes) {
        p.rgb = rgb.map_or(UNCOLORED, |[r, g, b]| [r, g, b, 255]);
        p.class_rgb = class;
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cam() -> CameraModel {
        CameraModel::pinhole(500.0, 500.0, 512.0, 384.0, 1024, 768)
    }

    #[test]
    fn optical_axis() {
        let c = CameraModel::pinhole(2.0, 2.0, 0.0, 0.0, 4, 4);
        let d = DepthFrame::new(4, 4, [vec![700], vec![0; 15]].concat()).unwrap();
        let cloud = backproject(&d, &c).unwrap();
        assert_eq!(cloud.len(), 1);
        let [x, y, z] = cloud.points[0].position;
        assert_eq!((x, y), (0.0, 0.0));
        assert_relative_eq!(z, 0.7, epsilon = 1e-15);
    }

    #[test]
    fn hand_computed_pinhole() {
        let mut d = DepthFrame::filled(1024, 768, 0);
        d.set(612, 384, 500);
        let p = backproject(&d, &cam()).unwrap().points[0];
        assert_relative_eq!(p.position[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(p.position[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.position[2], 0.5, epsilon = 1e-12);
        assert_eq!(p.source_pixel, (612, 384));
    }

    #[test]
    fn empty_and_mismatch() {
        assert!(backproject(&DepthFrame::filled(1024, 768, 0), &cam())
            .unwrap()
            .is_empty());
        assert!(backproject(&DepthFrame::filled(10, 10, 5), &cam()).is_err());
        let singular = CameraModel::pinhole(0.0, 500.0, 5.0, 5.0, 10, 10);
        assert!(matches!(
            backproject(&DepthFrame::filled(10, 10, 5), &singular),
            Err(Error::SingularIntrinsics)
        ));
    }

    #[test]
    fn behind_camera_is_out_of_view() {
        let cloud = PointCloud {
            points: vec![Point {
                position: [0.0, 0.0, -1.0],
                rgb: UNCOLORED,
                class_rgb: None,
                source_pixel: (0, 0),
            }],
        };
        let proj = project(&cloud, &cam());
        assert!(!proj.in_view[0]);
        assert!(proj.index_image.iter().all(|&i| i == Projection::EMPTY));
    }

    #[test]
    fn nearer_point_on_a_ray_wins() {
        let mk = |z: f64| Point {
            position: [0.1 * z / 0.5, 0.0, z],
            rgb: UNCOLORED,
            class_rgb: None,
            source_pixel: (0, 0),
        };
        let cloud = PointCloud {
            points: vec![mk(0.9), mk(0.4), mk(0.6), mk(0.4)],
        };
        let proj = project(&cloud, &cam());
        assert_eq!(proj.winner(612, 384), Some(1));
    }

    #[test]
    fn bilinear_midpoint_and_edges() {
        let mut img = RgbImage::new(2, 1);
        img.put_pixel(0, 0, image::Rgb([0, 10, 255]));
        img.put_pixel(1, 0, image::Rgb([100, 20, 255]));
        assert_eq!(sample_bilinear(&img, 0.5, 0.0), Some([50, 15, 255]));
        assert_eq!(sample_bilinear(&img, -0.4, 0.2), Some([0, 10, 255]));
        assert_eq!(sample_bilinear(&img, 1.5, 0.0), None);
    }

    #[test]
    fn identity_alignment() {
        let c = CameraModel::pinhole(50.0, 50.0, 16.0, 12.0, 32, 24);
        let img = RgbImage::from_fn(32, 24, |x, y| image::Rgb([x as u8 * 7, y as u8 * 9, (x ^ y) as u8]));
        let mut d = DepthFrame::filled(32, 24, 600);
        d.set(3, 3, 0);
        let a = align_rgb_to_depth(&img, &c, &d, &c).unwrap();
        for y in 0..24u32 {
            for x in 0..32u32 {
                let valid = d.get(x as usize, y as usize) != 0;
                assert_eq!(a.mask[(y * 32 + x) as usize], valid);
                let want = if valid { img.get_pixel(x, y).0 } else { [0; 3] };
                assert_eq!(a.image.get_pixel(x, y).0, want);
            }
        }
        let none = align_rgb_to_depth(&img, &c, &DepthFrame::filled(32, 24, 0), &c).unwrap();
        assert!(none.mask.iter().all(|m| !m));
        let filled = align_rgb_to_depth_filled(&img, &c, &d, &c).unwrap();
        assert!(filled.mask.iter().all(|&m| m));
        assert_eq!(filled.image, img);
    }

    #[test]
    fn occluded_points_are_not_colored() {
        // a near strip hides part of a far plane from a camera shifted sideways
        let c = CameraModel::pinhole(50.0, 50.0, 16.0, 12.0, 32, 24);
        let side = c.translated(Vector3::new(0.05, 0.0, 0.0));
        let mut d = DepthFrame::filled(32, 24, 1000);
        for y in 0..24 {
            for x in 12..16 {
                d.set(x, y, 300);
            }
        }
        let img = RgbImage::from_pixel(32, 24, image::Rgb([9, 9, 9]));
        let a = align_rgb_to_depth(&img, &side, &d, &c).unwrap();
        let hidden = (0..32).filter(|&x| !a.mask[5 * 32 + x]).count();
        assert!(hidden >= 4, "{hidden}");
        for x in 12..16 {
            assert!(a.mask[5 * 32 + x], "strip pixel {x} is in front");
        }
    }

    #[test]
    fn full_overlap_gives_every_point_a_class() {
        let c = CameraModel::pinhole(50.0, 50.0, 16.0, 12.0, 32, 24);
        let rig = Rig {
            depth: c.clone(),
            rgb: c.clone(),
            hs: c.clone(),
        };
        let img = RgbImage::from_pixel(32, 24, image::Rgb([1, 2, 3]));
        let class = RgbImage::from_pixel(32, 24, image::Rgb([255, 0, 0]));
        let cloud = register_frame(&DepthFrame::filled(32, 24, 500), &img, Some(&class), &rig).unwrap();
        assert_eq!(cloud.len(), 32 * 24);
        assert!(cloud
            .points
            .iter()
            .all(|p| p.class_rgb == Some([255, 0, 0, 255]) && p.rgb == [1, 2, 3, 255]));
        let empty = register_frame(&DepthFrame::filled(32, 24, 0), &img, Some(&class), &rig).unwrap();
        assert!(empty.is_empty());
    }
}
