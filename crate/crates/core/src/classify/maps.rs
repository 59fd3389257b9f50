use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label value marking pixels without ground truth.
pub const UNLABELED: u8 = u8::MAX;

/// A tissue class with its display color.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub name: String,
    pub color: [u8; 4],
}

impl ClassInfo {
    pub fn new(name: impl Into<String>, rgb: [u8; 3]) -> Self {
        ClassInfo {
            name: name.into(),
            color: [rgb[0], rgb[1], rgb[2], 255],
        }
    }

    /// Tumor red, healthy green, blood blue, dura-mater pink.
    pub fn default_palette() -> Vec<ClassInfo> {
        vec![
            ClassInfo::new("tumor", [255, 0, 0]),
            ClassInfo::new("healthy", [0, 255, 0]),
            ClassInfo::new("blood", [0, 0, 255]),
            ClassInfo::new("dura-mater", [255, 105, 180]),
        ]
    }
}

/// Per-pixel class probabilities on the spectral grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    classes: usize,
    probs: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, classes: usize, probs: Vec<f32>) -> Result<Self> {
        if classes == 0 || probs.len() != width * height * classes {
            return Err(Error::InvalidInput(format!(
                "probability buffer of {} does not fit {width}x{height}x{classes}",
                probs.len()
            )));
        }
        Ok(ProbabilityMap {
            width,
            height,
            classes,
            probs,
        })
    }

    /// One-hot rows from a label map.
    pub fn one_hot(labels: &LabelMap, classes: usize) -> Result<Self> {
        let mut probs = vec![0.0; labels.len() * classes];
        for (i, &l) in labels.labels().iter().enumerate() {
            if l as usize >= classes {
                return Err(Error::InvalidInput(format!("label {l} out of range")));
            }
            probs[i * classes + l as usize] = 1.0;
        }
        Self::new(labels.width(), labels.height(), classes, probs)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn classes(&self) -> usize {
        self.classes
    }
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
    pub fn as_slice(&self) -> &[f32] {
        &self.probs
    }
    pub fn row(&self, pixel: usize) -> &[f32] {
        &self.probs[pixel * self.classes..(pixel + 1) * self.classes]
    }
    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.probs.chunks_exact(self.classes)
    }

    /// Scores of one class for every pixel.
    pub fn class_scores(&self, class: usize) -> Vec<f64> {
        self.rows().map(|r| r[class] as f64).collect()
    }
}

/// K-Means result over the spectral grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMap {
    pub width: usize,
    pub height: usize,
    pub k: usize,
    pub bands: usize,
    pub assignment: Vec<u8>,
    /// `k × bands`, row-major.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl ClusterMap {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.bands..(c + 1) * self.bands]
    }
}

/// Per-pixel class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{} labels do not fit {width}x{height}",
                labels.len()
            )));
        }
        Ok(LabelMap { width, height, labels })
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn len(&self) -> usize {
        self.labels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Writes the labels as an 8-bit grayscale PNG (class index per pixel).
    pub fn write_png(&self, path: &std::path::Path) -> Result<()> {
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.labels.clone())
            .expect("label buffer size");
        img.save(path)?;
        Ok(())
    }

    pub fn read_png(path: &std::path::Path) -> Result<Self> {
        let img = image::open(path)?.into_luma8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }
}
