use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::maps::{ClassInfo, ProbabilityMap};
use crate::error::{Error, Result};
use crate::hypercube::{HyperCube, Layout};
use crate::par;

pub const MODEL_VERSION: u32 = 1;

/// One-vs-rest RBF sub-classifier with its sigmoid calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryClassifier {
    pub gamma: f64,
    pub bias: f64,
    /// Platt parameters: `p = 1 / (1 + exp(a * f + b))`.
    pub platt_a: f64,
    pub platt_b: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for every support vector.
    pub dual_coefs: Vec<f64>,
}

impl BinaryClassifier {
    /// Raw decision value `sum_i coef_i * exp(-gamma * |x - s_i|^2) + bias`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * (-self.gamma * squared_distance(x, sv)).exp())
            .sum::<f64>()
            + self.bias
    }
}

/// Multiclass SVM: one calibrated sub-classifier per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub version: u32,
    pub feature_count: usize,
    pub classes: Vec<ClassInfo>,
    pub classifiers: Vec<BinaryClassifier>,
}

impl SvmModel {
    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        if self.classes.len() < 2 || self.classes.len() != self.classifiers.len() {
            return Err(Error::InvalidInput(format!(
                "{} classes need as many sub-classifiers, found {}",
                self.classes.len(),
                self.classifiers.len()
            )));
        }
        for (c, class) in self.classes.iter().enumerate() {
            if class.color[3] != 255 {
                return Err(Error::InvalidInput(format!("class {c} color is not opaque")));
            }
        }
        for (c, clf) in self.classifiers.iter().enumerate() {
            if !(clf.gamma > 0.0) {
                return Err(Error::InvalidInput(format!("classifier {c}: gamma must be > 0")));
            }
            if clf.support_vectors.is_empty() || clf.support_vectors.len() != clf.dual_coefs.len() {
                return Err(Error::InvalidInput(format!(
                    "classifier {c}: needs >= 1 support vector and one coefficient each"
                )));
            }
            if clf.support_vectors.iter().any(|sv| sv.len() != self.feature_count) {
                return Err(Error::InvalidInput(format!(
                    "classifier {c}: support vector length differs from feature count {}",
                    self.feature_count
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let model: SvmModel = serde_json::from_slice(&bytes)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn sigmoid(decision: f64, a: f64, b: f64) -> f64 {
    let z = decision * a + b;
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Prediction-ready form of a model.
///
/// Support vectors shared between sub-classifiers (same vector, same gamma) are
/// evaluated once per pixel.
#[derive(Debug, Clone)]
pub struct CompiledSvm {
    features: usize,
    classes: usize,
    /// unique support vectors, row-major
    vectors: Vec<f64>,
    gammas: Vec<f64>,
    /// `unique × classes` coefficient table
    coefs: Vec<f64>,
    bias: Vec<f64>,
    platt: Vec<(f64, f64)>,
}

impl CompiledSvm {
    pub fn new(model: &SvmModel) -> Result<Self> {
        model.validate()?;
        let classes = model.class_count();
        let features = model.feature_count;
        let mut index: HashMap<(u64, Vec<u64>), usize> = HashMap::new();
        let mut vectors = Vec::new();
        let mut gammas = Vec::new();
        let mut coefs: Vec<f64> = Vec::new();
        for (c, clf) in model.classifiers.iter().enumerate() {
            for (sv, &coef) in clf.support_vectors.iter().zip(&clf.dual_coefs) {
                let key = (clf.gamma.to_bits(), sv.iter().map(|v| v.to_bits()).collect());
                let slot = *index.entry(key).or_insert_with(|| {
                    vectors.extend_from_slice(sv);
                    gammas.push(clf.gamma);
                    coefs.extend(std::iter::repeat_n(0.0, classes));
                    gammas.len() - 1
                });
                coefs[slot * classes + c] += coef;
            }
        }
        Ok(CompiledSvm {
            features,
            classes,
            vectors,
            gammas,
            coefs,
            bias: model.classifiers.iter().map(|c| c.bias).collect(),
            platt: model.classifiers.iter().map(|c| (c.platt_a, c.platt_b)).collect(),
        })
    }

    pub fn unique_support_vectors(&self) -> usize {
        self.gammas.len()
    }

    /// Raw decision values of every sub-classifier.
    pub fn decisions(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        let n = self.features;
        for (u, sv) in self.vectors.chunks_exact(n).enumerate() {
            let k = (-self.gammas[u] * squared_distance(x, sv)).exp();
            let row = &self.coefs[u * self.classes..(u + 1) * self.classes];
            for (o, c) in out.iter_mut().zip(row) {
                *o += c * k;
            }
        }
    }

    /// Calibrated, renormalized class probabilities for one feature vector.
    pub fn probabilities(&self, x: &[f64], out: &mut [f64]) {
        self.decisions(x, out);
        for (p, &(a, b)) in out.iter_mut().zip(&self.platt) {
            *p = sigmoid(*p, a, b);
        }
        let total: f64 = out.iter().sum();
        if total > 0.0 && total.is_finite() {
            out.iter_mut().for_each(|p| *p /= total);
        } else {
            out.fill(1.0 / self.classes as f64);
        }
    }
}

/// Per-pixel class probabilities for a band-sequential cube.
pub fn svm_predict(cube: &HyperCube, model: &SvmModel) -> Result<ProbabilityMap> {
    cube.require_layout(Layout::BandSequential)?;
    if cube.bands_active() != model.feature_count {
        return Err(Error::FeatureMismatch {
            expected: model.feature_count,
            actual: cube.bands_active(),
        });
    }
    let compiled = CompiledSvm::new(model)?;
    let n = model.feature_count;
    let classes = model.class_count();
    let pixels = cube.active_pixels_f32();
    let mut probs = vec![0.0f32; cube.pixel_count() * classes];
    const BLOCK: usize = 256;
    if !probs.is_empty() {
        par::for_each_chunk_mut(&mut probs, BLOCK * classes, |blk, out| {
            let mut x = vec![0.0f64; n];
            let mut p = vec![0.0f64; classes];
            for (k, row) in out.chunks_mut(classes).enumerate() {
                let i = blk * BLOCK + k;
                for (xv, s) in x.iter_mut().zip(&pixels[i * n..(i + 1) * n]) {
                    *xv = *s as f64;
                }
                compiled.probabilities(&x, &mut p);
                for (r, v) in row.iter_mut().zip(&p) {
                    *r = *v as f32;
                }
            }
        });
    }
    ProbabilityMap::new(cube.width(), cube.height(), classes, probs)
}
