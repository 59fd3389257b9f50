use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::spec::{band_centers_nm, Material, SceneObject, SceneSpec};
use super::Stream;
use crate::classify::{LabelMap, UNLABELED};
use crate::depthproc::DepthFrame;
use crate::error::Result;
use crate::geometry::CameraModel;
use crate::hypercube::{BandMap, CorrectionMatrix, RawMosaicFrame, ReferencePair};
use crate::par;

/// Ray hit: distance along a ray whose camera-frame z component is 1 (so `depth` is the
/// camera-frame depth), world point and material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub depth: f64,
    pub point: Vector3<f64>,
    pub material: usize,
}

#[derive(Debug, Clone)]
enum Shape {
    Plane {
        center: Vector3<f64>,
        normal: Vector3<f64>,
        axes: Option<(Vector3<f64>, Vector3<f64>, [f64; 2])>,
    },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
}

/// Analytic renderer over a validated [`SceneSpec`].
#[derive(Debug, Clone)]
pub struct Scene {
    spec: SceneSpec,
    shapes: Vec<(Shape, usize)>,
    bands_nm: Vec<f64>,
    /// Per material, reflectance per band.
    spectra: Vec<Vec<f64>>,
}

impl Scene {
    pub fn new(spec: SceneSpec) -> Result<Self> {
        spec.validate()?;
        let shapes = spec
            .objects
            .iter()
            .map(|o| match *o {
                SceneObject::Plane {
                    center,
                    normal,
                    half_extent,
                    material,
                } => {
                    let n = Vector3::from(normal).normalize();
                    let axes = half_extent.map(|h| {
                        let helper = if n.y.abs() < 0.9 { Vector3::y() } else { Vector3::x() };
                        let a = helper.cross(&n).normalize();
                        (a, n.cross(&a), h)
                    });
                    (
                        Shape::Plane {
                            center: center.into(),
                            normal: n,
                            axes,
                        },
                        material,
                    )
                }
                SceneObject::Sphere {
                    center,
                    radius,
                    material,
                } => (
                    Shape::Sphere {
                        center: center.into(),
                        radius,
                    },
                    material,
                ),
            })
            .collect();
        let bands_nm = band_centers_nm(spec.sensor.bands());
        let spectra = spec
            .materials
            .iter()
            .map(|m| bands_nm.iter().map(|&nm| m.reflectance(nm)).collect())
            .collect();
        Ok(Scene {
            spec,
            shapes,
            bands_nm,
            spectra,
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }
    pub fn bands_nm(&self) -> &[f64] {
        &self.bands_nm
    }
    pub fn material(&self, id: usize) -> &Material {
        &self.spec.materials[id]
    }

    /// Nearest surface along the ray through pixel `(u, v)`.
    pub fn cast(&self, cam: &CameraModel, u: f64, v: f64) -> Option<Hit> {
        let origin = cam.center();
        let dir = cam.r.transpose() * cam.pixel_to_camera(u, v, 1.0);
        let mut best: Option<Hit> = None;
        for (shape, material) in &self.shapes {
            let tau = match shape {
                Shape::Plane { center, normal, axes } => {
                    let denom = normal.dot(&dir);
                    if denom == 0.0 {
                        continue;
                    }
                    let tau = normal.dot(&(center - origin)) / denom;
                    if let Some((a, b, h)) = axes {
                        let rel = origin + dir * tau - center;
                        if rel.dot(a).abs() > h[0] || rel.dot(b).abs() > h[1] {
                            continue;
                        }
                    }
                    tau
                }
                Shape::Sphere { center, radius } => {
                    let oc = origin - center;
                    let a = dir.dot(&dir);
                    let b = 2.0 * dir.dot(&oc);
                    let c = oc.dot(&oc) - radius * radius;
                    let disc = b * b - 4.0 * a * c;
                    if disc < 0.0 {
                        continue;
                    }
                    let sq = disc.sqrt();
                    let near = (-b - sq) / (2.0 * a);
                    if near > 0.0 {
                        near
                    } else {
                        (-b + sq) / (2.0 * a)
                    }
                }
            };
            if tau > 0.0 && best.is_none_or(|h| tau < h.depth) {
                best = Some(Hit {
                    depth: tau,
                    point: origin + dir * tau,
                    material: *material,
                });
            }
        }
        best
    }

    /// Unquantized RGB of a surface point, 8-bit scale.
    pub fn shade(&self, material: usize, p: &Vector3<f64>) -> [f64; 3] {
        let tex = self.spec.texture.pattern(p) * self.spec.texture.rgb_amplitude;
        self.spec.materials[material]
            .albedo
            .map(|a| (a * (1.0 + tex)).clamp(0.0, 255.0))
    }

    /// Reflectance per band of a surface point.
    pub fn spectrum(&self, material: usize, p: &Vector3<f64>) -> Vec<f64> {
        let gain = 1.0 + self.spec.texture.pattern(p) * self.spec.texture.spectral_amplitude;
        self.spectra[material]
            .iter()
            .map(|r| (r * gain).clamp(0.0, 1.0))
            .collect()
    }

    fn cast_all(&self, cam: &CameraModel) -> Vec<Option<Hit>> {
        let w = cam.width;
        par::map_indexed(cam.width * cam.height, |i| {
            self.cast(cam, (i % w) as f64, (i / w) as f64)
        })
    }

    /// Noise-free depth in millimeters; pixels that hit nothing are missing.
    pub fn render_depth(&self, cam: &CameraModel) -> DepthFrame {
        let values = self
            .cast_all(cam)
            .iter()
            .map(|h| match h {
                Some(h) => (h.depth / cam.depth_scale).round().clamp(0.0, u16::MAX as f64) as u16,
                None => 0,
            })
            .collect();
        DepthFrame::new(cam.width, cam.height, values).expect("camera-sized buffer")
    }

    pub fn render_rgb(&self, cam: &CameraModel) -> RgbImage {
        let hits = self.cast_all(cam);
        let mut img = RgbImage::new(cam.width as u32, cam.height as u32);
        for (px, h) in img.pixels_mut().zip(&hits) {
            if let Some(h) = h {
                *px = Rgb(self.shade(h.material, &h.point).map(|c| c.round() as u8));
            }
        }
        img
    }

    /// Class index per pixel, [`UNLABELED`] for background or unlabeled materials.
    pub fn render_labels(&self, cam: &CameraModel) -> LabelMap {
        let labels = self
            .cast_all(cam)
            .iter()
            .map(|h| {
                h.and_then(|h| self.spec.materials[h.material].class)
                    .unwrap_or(UNLABELED)
            })
            .collect();
        LabelMap::new(cam.width, cam.height, labels).expect("camera-sized buffer")
    }

    /// Reflectance cube as seen by `cam`, `[pixel][band]`; zeros where nothing is hit.
    pub fn render_reflectance(&self, cam: &CameraModel) -> Vec<Vec<f64>> {
        let bands = self.bands_nm.len();
        let hits = self.cast_all(cam);
        par::map_slice(&hits, |h| match h {
            Some(h) => self.spectrum(h.material, &h.point),
            None => vec![0.0; bands],
        })
    }

    fn sensor_band_map(&self) -> BandMap {
        BandMap::identity(self.spec.sensor.pattern)
    }

    /// Dark and white reference frames with per-pixel fixed-pattern variation.
    pub fn references(&self) -> ReferencePair {
        let s = &self.spec.sensor;
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(Stream::References.id(0));
        let n = s.raw_width * s.raw_height;
        let half = s.reference_variation / 2.0;
        let jitter = rand::distr::Uniform::new_inclusive(-half, half).expect("finite variation");
        let mut dark = Vec::with_capacity(n);
        let mut white = Vec::with_capacity(n);
        for _ in 0..n {
            let d = (s.dark_level + jitter.sample(&mut rng)).round();
            let span = (s.white_span + jitter.sample(&mut rng)).round();
            dark.push(d as u16);
            white.push((d + span) as u16);
        }
        let frame = |v| RawMosaicFrame::new(s.raw_width, s.raw_height, self.sensor_band_map(), v).expect("sensor size");
        ReferencePair {
            dark: frame(dark),
            white: frame(white),
        }
    }

    /// Band-mixing matrix of the sensor on the active block: `1 − 2c` on the diagonal and
    /// `c` on each spectral neighbour (edges keep the missing share).
    pub fn crosstalk_block(&self) -> Vec<f64> {
        let n = self.bands_nm.len();
        let c = self.spec.sensor.crosstalk;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 1.0;
            for j in [i.wrapping_sub(1), i + 1] {
                if j < n {
                    m[i * n + j] = c;
                    diag -= c;
                }
            }
            m[i * n + i] = diag;
        }
        m
    }

    /// Matrix undoing [`Scene::crosstalk_block`] under the row-vector convention of
    /// `spectral_correct` (`v·M`), embedded in the stored band count.
    pub fn correction_matrix(&self, stored: usize) -> Result<CorrectionMatrix> {
        let n = self.bands_nm.len();
        let m = nalgebra::DMatrix::from_row_slice(n, n, &self.crosstalk_block());
        let inv = m
            .try_inverse()
            .ok_or_else(|| crate::Error::Degenerate("crosstalk matrix is singular".into()))?;
        let block: Vec<f32> = (0..n * n).map(|i| inv[(i % n, i / n)] as f32).collect();
        CorrectionMatrix::from_active_block(stored, n, &block)
    }

    /// Raw mosaic of the scene for `frame`: every cell of a block samples the reflectance
    /// of that block's spectral pixel, mixed by crosstalk and scaled between the references.
    pub fn render_mosaic(&self, refs: &ReferencePair, frame: u64) -> RawMosaicFrame {
        let s = &self.spec.sensor;
        let hs = self.spec.cameras.get("hs").expect("validated");
        let refl = self.render_reflectance(hs);
        let n = self.bands_nm.len();
        let mix = self.crosstalk_block();
        let mixed: Vec<Vec<f64>> = par::map_slice(&refl, |r| {
            (0..n)
                .map(|i| (0..n).map(|j| mix[i * n + j] * r[j]).sum::<f64>())
                .collect()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(Stream::HsReadNoise.id(frame));
        let noise = Normal::new(0.0, s.read_noise_counts.max(0.0)).expect("finite sigma");
        let map = self.sensor_band_map();
        let (cw, _) = s.cube_size();
        let p = s.pattern;
        let mut values = Vec::with_capacity(s.raw_width * s.raw_height);
        for y in 0..s.raw_height {
            for x in 0..s.raw_width {
                let i = y * s.raw_width + x;
                let (dark, white) = (refs.dark.values()[i] as f64, refs.white.values()[i] as f64);
                let (bx, by) = (x / p, y / p);
                let r = if bx < cw && by < s.cube_size().1 {
                    mixed[by * cw + bx][map.band_at(y % p, x % p)]
                } else {
                    0.0
                };
                let read = if s.read_noise_counts > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                values.push((dark + r * (white - dark) + read).round().clamp(0.0, 1023.0) as u16);
            }
        }
        RawMosaicFrame::new(s.raw_width, s.raw_height, map, values).expect("sensor size")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthscene::spec::{SpectralBump, Texture};

    fn plane_scene(z: f64) -> SceneSpec {
        let mut s = SceneSpec::demo().downscaled(8);
        s.objects = vec![SceneObject::Plane {
            center: [0.0, 0.0, z],
            normal: [0.0, 0.0, 1.0],
            half_extent: None,
            material: 1,
        }];
        s
    }

    #[test]
    fn fronto_parallel_plane_is_constant_depth() {
        let scene = Scene::new(plane_scene(0.5)).unwrap();
        let cam = scene.spec().cameras.get("depth").unwrap().clone();
        let d = scene.render_depth(&cam);
        assert!(d.values().iter().all(|&v| v == 500));
    }

    #[test]
    fn sphere_hit_depth() {
        let mut s = plane_scene(2.0);
        s.objects.push(SceneObject::Sphere {
            center: [0.0, 0.0, 0.6],
            radius: 0.1,
            material: 0,
        });
        let scene = Scene::new(s).unwrap();
        let cam = CameraModel::pinhole(100.0, 100.0, 10.0, 10.0, 21, 21);
        let h = scene.cast(&cam, 10.0, 10.0).unwrap();
        assert!((h.depth - 0.5).abs() < 1e-12);
        assert_eq!(h.material, 0);
    }

    #[test]
    fn disjoint_bumps_are_separable_by_argmax_band() {
        let mut s = plane_scene(0.5);
        s.texture = Texture {
            spectral_amplitude: 0.2,
            ..Texture::default()
        };
        s.materials[0].bumps = vec![SpectralBump {
            center_nm: 700.0,
            width_nm: 15.0,
            amplitude: 0.8,
        }];
        s.materials[1].bumps = vec![SpectralBump {
            center_nm: 900.0,
            width_nm: 15.0,
            amplitude: 0.8,
        }];
        let scene = Scene::new(s).unwrap();
        let argmax = |m: usize, p: Vector3<f64>| {
            let sp = scene.spectrum(m, &p);
            (0..sp.len()).max_by(|&a, &b| sp[a].total_cmp(&sp[b])).unwrap()
        };
        for k in 0..200 {
            let p = Vector3::new(k as f64 * 0.003, -(k as f64) * 0.002, 0.5);
            let (a, b) = (argmax(0, p), argmax(1, p));
            assert!((scene.bands_nm()[a] - 700.0).abs() < 7.0);
            assert!((scene.bands_nm()[b] - 900.0).abs() < 7.0);
        }
    }

    #[test]
    fn correction_inverts_crosstalk() {
        let mut s = plane_scene(0.5);
        s.sensor.crosstalk = 0.05;
        let scene = Scene::new(s).unwrap();
        let n = 25;
        let mix = scene.crosstalk_block();
        let corr = scene.correction_matrix(32).unwrap();
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| corr.get(i, k) as f64 * mix[k * n + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-5);
            }
        }
        let plain = Scene::new(plane_scene(0.5)).unwrap();
        assert_eq!(plain.correction_matrix(32).unwrap(), CorrectionMatrix::identity(32, 25));
    }

    #[test]
    fn references_are_ordered_and_in_range() {
        let scene = Scene::new(plane_scene(0.5)).unwrap();
        let r = scene.references();
        for (&d, &w) in r.dark.values().iter().zip(r.white.values()) {
            assert!(w > d && w <= 1023 && (28..=36).contains(&d));
        }
    }
}
