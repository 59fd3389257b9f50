use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Missing-sample sentinel.
pub const MISSING: u16 = 0;
/// Expected operating range of valid samples, millimeters.
pub const OPERATING_RANGE_MM: (u16, u16) = (250, 1000);

/// 16-bit depth image in millimeters, row-major; 0 marks a missing sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    width: usize,
    height: usize,
    values: Vec<u16>,
}

#[derive(Serialize, Deserialize)]
struct RawDescriptor {
    width: usize,
    height: usize,
    unit: String,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, values: Vec<u16>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{} depth samples do not fit {width}x{height}",
                values.len()
            )));
        }
        Ok(DepthFrame { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Self {
        DepthFrame {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn values(&self) -> &[u16] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [u16] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<u16> {
        self.values
    }
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.values[y * self.width + x]
    }
    pub fn set(&mut self, x: usize, y: usize, v: u16) {
        self.values[y * self.width + x] = v;
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != MISSING).count()
    }

    /// Valid samples outside [`OPERATING_RANGE_MM`]. Informational only.
    pub fn out_of_range_count(&self) -> usize {
        let (lo, hi) = OPERATING_RANGE_MM;
        self.values
            .iter()
            .filter(|&&v| v != MISSING && (v < lo || v > hi))
            .count()
    }

    pub(crate) fn require_same_size(&self, other: (usize, usize), what: &str) -> Result<()> {
        if (self.width, self.height) != other {
            return Err(Error::GeometryMismatch(format!(
                "depth is {}x{}, {what} is {}x{}",
                self.width, self.height, other.0, other.1
            )));
        }
        Ok(())
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, self.values.clone())
                .expect("depth buffer size");
        img.save(path)?;
        Ok(())
    }

    pub fn read_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?;
        if !matches!(img.color(), image::ColorType::L16) {
            return Err(Error::InvalidInput(format!(
                "{} is not a 16-bit grayscale image",
                path.display()
            )));
        }
        let img = img.into_luma16();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Little-endian `u16` samples plus a JSON descriptor next to them.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let desc = RawDescriptor {
            width: self.width,
            height: self.height,
            unit: "mm".into(),
        };
        let sidecar = Self::sidecar_path(path);
        fs::write(&sidecar, serde_json::to_vec_pretty(&desc)?).map_err(|e| Error::io(&sidecar, e))
    }

    pub fn read_raw(path: &Path) -> Result<Self> {
        let sidecar = Self::sidecar_path(path);
        let desc: RawDescriptor = serde_json::from_slice(&fs::read(&sidecar).map_err(|e| Error::io(&sidecar, e))?)?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() != desc.width * desc.height * 2 {
            return Err(Error::InvalidInput(format!(
                "{} holds {} bytes, descriptor implies {}",
                path.display(),
                bytes.len(),
                desc.width * desc.height * 2
            )));
        }
        let values = bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        Self::new(desc.width, desc.height, values)
    }
}
