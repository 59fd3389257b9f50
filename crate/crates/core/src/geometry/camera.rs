use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROTATION_TOL: f64 = 1e-6;

/// Zero-skew pinhole camera with a world-to-camera pose `p_cam = R·p_world + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraJson", into = "CameraJson")]
pub struct CameraModel {
    pub k: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
    pub width: usize,
    pub height: usize,
    /// Meters per depth unit of frames captured by this camera.
    pub depth_scale: f64,
}

#[derive(Serialize, Deserialize)]
struct CameraJson {
    #[serde(rename = "K")]
    k: [f64; 9],
    #[serde(rename = "R")]
    r: [f64; 9],
    t: [f64; 3],
    resolution: [usize; 2],
    depth_scale: f64,
}

impl TryFrom<CameraJson> for CameraModel {
    type Error = Error;
    fn try_from(j: CameraJson) -> Result<Self> {
        let cam = CameraModel {
            k: Matrix3::from_row_slice(&j.k),
            r: Matrix3::from_row_slice(&j.r),
            t: Vector3::from_column_slice(&j.t),
            width: j.resolution[0],
            height: j.resolution[1],
            depth_scale: j.depth_scale,
        };
        cam.validate()?;
        Ok(cam)
    }
}

impl From<CameraModel> for CameraJson {
    fn from(c: CameraModel) -> Self {
        let row_major = |m: &Matrix3<f64>| {
            let mut out = [0.0; 9];
            for (i, v) in out.iter_mut().enumerate() {
                *v = m[(i / 3, i % 3)];
            }
            out
        };
        CameraJson {
            k: row_major(&c.k),
            r: row_major(&c.r),
            t: [c.t.x, c.t.y, c.t.z],
            resolution: [c.width, c.height],
            depth_scale: c.depth_scale,
        }
    }
}

impl CameraModel {
    /// Camera at the world origin looking down +z, depth in millimeters.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Self {
        CameraModel {
            k: Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0),
            r: Matrix3::identity(),
            t: Vector3::zeros(),
            width,
            height,
            depth_scale: 0.001,
        }
    }

    pub fn with_pose(mut self, r: Matrix3<f64>, t: Vector3<f64>) -> Self {
        self.r = r;
        self.t = t;
        self
    }

    /// Same orientation, optical center moved by `d` (world frame).
    pub fn translated(&self, d: Vector3<f64>) -> Self {
        let mut c = self.clone();
        c.t = self.t - self.r * d;
        c
    }

    pub fn fx(&self) -> f64 {
        self.k[(0, 0)]
    }
    pub fn fy(&self) -> f64 {
        self.k[(1, 1)]
    }
    pub fn cx(&self) -> f64 {
        self.k[(0, 2)]
    }
    pub fn cy(&self) -> f64 {
        self.k[(1, 2)]
    }
    pub fn resolution(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.r.transpose() * self.t)
    }

    /// Checks only what back-projection needs: positive finite focal lengths.
    pub fn check_intrinsics(&self) -> Result<()> {
        let (fx, fy) = (self.fx(), self.fy());
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(Error::SingularIntrinsics);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_intrinsics()?;
        let k = &self.k;
        if k[(0, 1)] != 0.0 || k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 || k[(2, 2)] != 1.0 {
            return Err(Error::InvalidInput(
                "intrinsic matrix must be [[fx,0,cx],[0,fy,cy],[0,0,1]]".into(),
            ));
        }
        let (cx, cy) = (self.cx(), self.cy());
        if !(cx >= 0.0 && cx <= self.width as f64 && cy >= 0.0 && cy <= self.height as f64) {
            return Err(Error::InvalidInput(format!(
                "principal point ({cx}, {cy}) outside {}x{}",
                self.width, self.height
            )));
        }
        let orth = (self.r.transpose() * self.r - Matrix3::identity()).amax();
        if !(orth <= ROTATION_TOL && (self.r.determinant() - 1.0).abs() <= ROTATION_TOL) {
            return Err(Error::InvalidInput("R is not a proper rotation".into()));
        }
        if !self.t.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("translation is not finite".into()));
        }
        if !(self.depth_scale.is_finite() && self.depth_scale > 0.0) {
            return Err(Error::InvalidInput("depth_scale must be positive".into()));
        }
        Ok(())
    }

    /// Camera-frame point of pixel `(u, v)` at depth `z` meters.
    #[inline]
    pub fn pixel_to_camera(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx()) * z / self.fx(), (v - self.cy()) * z / self.fy(), z)
    }

    #[inline]
    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.r.transpose() * (p - self.t)
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.r * p + self.t
    }

    /// `(u, v, s)` with `(s·u, s·v, s) = K·(R·p + t)`.
    #[inline]
    pub fn project_world(&self, p: &Vector3<f64>) -> (f64, f64, f64) {
        let h = self.k * self.world_to_camera(p);
        (h.x / h.z, h.y / h.z, h.z)
    }

    /// Nearest pixel of a continuous image coordinate, if it lies on the sensor.
    #[inline]
    pub fn pixel_of(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        let (x, y) = ((u + 0.5).floor(), (v + 0.5).floor());
        if x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64 {
            Some((x as usize, y as usize))
        } else {
            None
        }
    }
}

/// Named cameras of one rig, as stored in `cameras.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CameraSet {
    pub cameras: BTreeMap<String, CameraModel>,
}

impl CameraSet {
    pub fn insert(&mut self, name: impl Into<String>, cam: CameraModel) {
        self.cameras.insert(name.into(), cam);
    }

    pub fn get(&self, name: &str) -> Result<&CameraModel> {
        self.cameras
            .get(name)
            .ok_or_else(|| Error::InvalidInput(format!("camera `{name}` not in calibration")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// The depth, RGB and hyperspectral cameras a frame is registered with.
#[derive(Debug, Clone, PartialEq)]
pub struct Rig {
    pub depth: CameraModel,
    pub rgb: CameraModel,
    pub hs: CameraModel,
}

impl Rig {
    pub fn from_set(set: &CameraSet) -> Result<Self> {
        Ok(Rig {
            depth: set.get("depth")?.clone(),
            rgb: set.get("rgb")?.clone(),
            hs: set.get("hs")?.clone(),
        })
    }
}
