use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::classify::ClassInfo;
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, CameraSet};

/// Lowest and highest band center of the 25-band sensor, nanometers.
pub const BAND_RANGE_NM: (f64, f64) = (665.0, 960.0);
pub const GRID_SIZE: usize = 5;
pub const GRID_SPACING_M: f64 = 0.01;

/// `n` band centers evenly spread over [`BAND_RANGE_NM`].
pub fn band_centers_nm(n: usize) -> Vec<f64> {
    let (lo, hi) = BAND_RANGE_NM;
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneObject {
    /// Plane through `center` with normal `normal`; a rectangle of `half_extent` along
    /// its in-plane axes when given, unbounded otherwise.
    Plane {
        center: [f64; 3],
        normal: [f64; 3],
        #[serde(default)]
        half_extent: Option<[f64; 2]>,
        material: usize,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        material: usize,
    },
}

impl SceneObject {
    pub fn material(&self) -> usize {
        match self {
            SceneObject::Plane { material, .. } | SceneObject::Sphere { material, .. } => *material,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralBump {
    pub center_nm: f64,
    pub width_nm: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Class index, or `None` for unlabeled surfaces.
    pub class: Option<u8>,
    /// Reflectance floor added to the bumps.
    pub base: f64,
    pub bumps: Vec<SpectralBump>,
    /// Linear RGB albedo in 8-bit levels.
    pub albedo: [f64; 3],
}

impl Material {
    /// Reflectance at `nm`, clamped to [0, 1].
    pub fn reflectance(&self, nm: f64) -> f64 {
        let bumps: f64 = self
            .bumps
            .iter()
            .map(|b| b.amplitude * (-(nm - b.center_nm).powi(2) / (2.0 * b.width_nm * b.width_nm)).exp())
            .sum();
        (self.base + bumps).clamp(0.0, 1.0)
    }
}

/// World-space sinusoidal shading shared by every surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Texture {
    pub period_m: f64,
    /// Relative RGB modulation depth.
    pub rgb_amplitude: f64,
    /// Relative spectral modulation depth.
    pub spectral_amplitude: f64,
}

impl Default for Texture {
    fn default() -> Self {
        Texture {
            period_m: 0.04,
            rgb_amplitude: 0.25,
            spectral_amplitude: 0.1,
        }
    }
}

impl Texture {
    /// Pattern value in [−1, 1] at a world point.
    pub fn pattern(&self, p: &Vector3<f64>) -> f64 {
        let k = std::f64::consts::TAU / self.period_m;
        (k * p.x).sin() * (k * p.y).cos() * 0.5 + (k * 0.7 * (p.y + p.z)).sin() * 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterferenceLine {
    /// Frames per left-to-right sweep; 0 disables the line.
    pub period_frames: u64,
    pub thickness_px: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub dropout_rate: f64,
    pub flying_point_rate: f64,
    pub flying_point_offset_mm: f64,
    pub temporal_jitter_sigma_mm: f64,
    pub interference_line: InterferenceLine,
    /// Per-pixel offset that stays fixed across frames.
    pub depth_gaussian_sigma_mm: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        let sigma = |s: f64| s >= 0.0 && s.is_finite();
        if !(rate(self.dropout_rate) && rate(self.flying_point_rate)) {
            return Err(Error::InvalidInput("noise rates must lie in [0, 1]".into()));
        }
        if !(sigma(self.temporal_jitter_sigma_mm)
            && sigma(self.depth_gaussian_sigma_mm)
            && self.flying_point_offset_mm.is_finite())
        {
            return Err(Error::InvalidInput(
                "noise sigmas must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        *self == NoiseSpec::default()
    }
}

/// Snapshot sensor model: raw size, counts and optics imperfections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    pub raw_width: usize,
    pub raw_height: usize,
    pub pattern: usize,
    /// Mean dark level, counts.
    pub dark_level: f64,
    /// Mean white-minus-dark span, counts.
    pub white_span: f64,
    /// Peak-to-peak per-pixel variation of both references, counts.
    pub reference_variation: f64,
    /// Gaussian read noise on scene frames, counts.
    pub read_noise_counts: f64,
    /// Fraction of each band leaking into its spectral neighbours.
    pub crosstalk: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            raw_width: crate::hypercube::DEFAULT_RAW_WIDTH,
            raw_height: crate::hypercube::DEFAULT_RAW_HEIGHT,
            pattern: crate::hypercube::DEFAULT_PATTERN,
            dark_level: 32.0,
            white_span: 940.0,
            reference_variation: 8.0,
            read_noise_counts: 2.0,
            crosstalk: 0.0,
        }
    }
}

impl SensorSpec {
    pub fn bands(&self) -> usize {
        self.pattern * self.pattern
    }
    pub fn cube_size(&self) -> (usize, usize) {
        (self.raw_width / self.pattern, self.raw_height / self.pattern)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub objects: Vec<SceneObject>,
    pub materials: Vec<Material>,
    #[serde(default = "ClassInfo::default_palette")]
    pub classes: Vec<ClassInfo>,
    /// Must hold `depth`, `rgb` and `hs`.
    pub cameras: CameraSet,
    /// Adds a 5×5 grid of RGB cameras around the depth camera, 1 cm apart.
    #[serde(default)]
    pub grid: bool,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default)]
    pub texture: Texture,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let spec: SceneSpec = serde_json::from_slice(&bytes)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.objects.is_empty() {
            return bad("scene has no objects".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.material() >= self.materials.len() {
                return bad(format!("object {i} references missing material {}", o.material()));
            }
            match o {
                SceneObject::Sphere { radius, .. } if !(*radius > 0.0) => {
                    return bad(format!("object {i} has a non-positive radius"));
                }
                SceneObject::Plane { normal, .. } if Vector3::from(*normal).norm() == 0.0 => {
                    return bad(format!("object {i} has a zero normal"));
                }
                _ => {}
            }
        }
        for (i, m) in self.materials.iter().enumerate() {
            if let Some(c) = m.class {
                if c as usize >= self.classes.len() {
                    return bad(format!("material {i} references missing class {c}"));
                }
            }
        }
        for name in ["depth", "rgb", "hs"] {
            self.cameras.get(name)?.validate()?;
        }
        let hs = self.cameras.get("hs")?;
        if hs.resolution() != self.sensor.cube_size() {
            return bad(format!(
                "hs camera is {}x{} but the sensor yields {}x{} spectral pixels",
                hs.width,
                hs.height,
                self.sensor.cube_size().0,
                self.sensor.cube_size().1
            ));
        }
        if self.sensor.dark_level + self.sensor.white_span + self.sensor.reference_variation > 1023.0 {
            return bad("sensor references exceed 10-bit range".into());
        }
        if !(0.0..0.3).contains(&self.sensor.crosstalk) {
            return bad("crosstalk must lie in [0, 0.3)".into());
        }
        if !(self.texture.period_m > 0.0) {
            return bad("texture period must be positive".into());
        }
        self.noise.validate()
    }

    /// Scene cameras plus, with `grid`, `grid_<row>_<col>` views around the depth camera.
    pub fn all_cameras(&self) -> Result<CameraSet> {
        let mut set = self.cameras.clone();
        if self.grid {
            let center = set.get("depth")?.clone();
            for (name, cam) in grid_cameras(&center) {
                set.insert(name, cam);
            }
        }
        Ok(set)
    }

    /// Four-class demo scene: a background sheet, a tilted strip and two spheres at
    /// depths between 0.3 m and 1 m.
    pub fn demo() -> Self {
        let bump = |c: f64, a: f64| SpectralBump {
            center_nm: c,
            width_nm: 28.0,
            amplitude: a,
        };
        let materials = vec![
            Material {
                class: Some(0),
                base: 0.12,
                bumps: vec![bump(700.0, 0.7)],
                albedo: [200.0, 70.0, 60.0],
            },
            Material {
                class: Some(1),
                base: 0.12,
                bumps: vec![bump(780.0, 0.7)],
                albedo: [210.0, 160.0, 140.0],
            },
            Material {
                class: Some(2),
                base: 0.12,
                bumps: vec![bump(860.0, 0.7)],
                albedo: [120.0, 20.0, 30.0],
            },
            Material {
                class: Some(3),
                base: 0.12,
                bumps: vec![bump(930.0, 0.7)],
                albedo: [230.0, 200.0, 170.0],
            },
        ];
        let objects = vec![
            SceneObject::Plane {
                center: [0.0, 0.0, 0.9],
                normal: [0.0, 0.0, -1.0],
                half_extent: None,
                material: 1,
            },
            SceneObject::Plane {
                center: [-0.09, 0.02, 0.7],
                normal: [0.3, 0.0, -1.0],
                half_extent: Some([0.05, 0.16]),
                material: 3,
            },
            SceneObject::Sphere {
                center: [0.05, -0.02, 0.6],
                radius: 0.07,
                material: 0,
            },
            SceneObject::Sphere {
                center: [0.02, 0.07, 0.42],
                radius: 0.03,
                material: 2,
            },
        ];
        let mut cameras = CameraSet::default();
        let depth = CameraModel::pinhole(600.0, 600.0, 511.5, 383.5, 1024, 768);
        let rgb = depth.translated(Vector3::new(0.014, 0.0, 0.0));
        let hs = CameraModel::pinhole(520.0, 520.0, 204.0, 108.0, 409, 217).translated(Vector3::new(0.03, 0.0, 0.0));
        cameras.insert("depth", depth);
        cameras.insert("rgb", rgb);
        cameras.insert("hs", hs);
        SceneSpec {
            objects,
            materials,
            classes: ClassInfo::default_palette(),
            cameras,
            grid: false,
            noise: NoiseSpec::default(),
            sensor: SensorSpec::default(),
            texture: Texture::default(),
            seed: 0,
        }
    }

    /// Shrinks every camera and the sensor by an integer `factor` (intrinsics scaled,
    /// poses kept).
    pub fn downscaled(mut self, factor: usize) -> Self {
        let f = factor as f64;
        for cam in self.cameras.cameras.values_mut() {
            cam.width /= factor;
            cam.height /= factor;
            cam.k[(0, 0)] /= f;
            cam.k[(1, 1)] /= f;
            cam.k[(0, 2)] = (cam.k[(0, 2)] + 0.5) / f - 0.5;
            cam.k[(1, 2)] = (cam.k[(1, 2)] + 0.5) / f - 0.5;
        }
        let (w, h) = self.sensor.cube_size();
        self.sensor.raw_width = (w / factor) * self.sensor.pattern;
        self.sensor.raw_height = (h / factor) * self.sensor.pattern;
        self
    }
}

/// The 25 grid cameras around `center`: `grid_<row>_<col>`, offset by
/// `((col − 2)·1 cm, (row − 2)·1 cm, 0)` in the world frame.
pub fn grid_cameras(center: &CameraModel) -> Vec<(String, CameraModel)> {
    let mid = (GRID_SIZE / 2) as f64;
    let mut out = Vec::with_capacity(GRID_SIZE * GRID_SIZE);
    for row in 0..GRID_SIZE {
        for col in 0..GRID_SIZE {
            let d = Vector3::new(
                (col as f64 - mid) * GRID_SPACING_M,
                (row as f64 - mid) * GRID_SPACING_M,
                0.0,
            );
            out.push((grid_name(row, col), center.translated(d)));
        }
    }
    out
}

pub fn grid_name(row: usize, col: usize) -> String {
    format!("grid_{row}_{col}")
}
