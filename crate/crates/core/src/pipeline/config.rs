use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::timing::DEFAULT_EXECUTIONS;
use crate::classify::KMeansParams;
use crate::depthproc::DepthConfig;
use crate::error::{Error, Result};
use crate::geometry::PlyFormat;
use crate::hypercube::Precision;
use crate::synthscene::{NoiseSpec, SceneSpec, MANIFEST};

/// Independently switchable stages. A stage that is off passes its input through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub statistical: bool,
    pub radius: bool,
    pub temporal: bool,
    pub inpaint: bool,
    /// Class colors attached to registered points.
    pub overlay: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles::all(true)
    }
}

impl Toggles {
    pub const NAMES: [&'static str; 5] = ["statistical", "radius", "temporal", "inpaint", "overlay"];

    pub fn all(on: bool) -> Self {
        Toggles {
            statistical: on,
            radius: on,
            temporal: on,
            inpaint: on,
            overlay: on,
        }
    }

    fn slot(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "statistical" => &mut self.statistical,
            "radius" => &mut self.radius,
            "temporal" => &mut self.temporal,
            "inpaint" => &mut self.inpaint,
            "overlay" => &mut self.overlay,
            _ => return None,
        })
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        self.clone().slot(name).map(|v| *v)
    }

    pub fn set(&mut self, name: &str, value: bool) -> Result<()> {
        *self
            .slot(name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown stage {name:?}")))? = value;
        Ok(())
    }

    /// `(name, state)` in [`Toggles::NAMES`] order.
    pub fn states(&self) -> Vec<(&'static str, bool)> {
        Self::NAMES
            .iter()
            .map(|&n| (n, self.get(n).expect("known name")))
            .collect()
    }
}

/// Frames rendered in memory instead of read from a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Scene file; the built-in demo scene when absent.
    pub spec: Option<PathBuf>,
    pub frames: usize,
    pub seed: Option<u64>,
    /// Integer downscale of every camera.
    pub downscale: usize,
    /// Replaces the scene's sensor noise.
    pub noise: Option<NoiseSpec>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            spec: None,
            frames: 10,
            seed: None,
            downscale: 1,
            noise: None,
        }
    }
}

impl GeneratorConfig {
    pub fn scene(&self) -> Result<SceneSpec> {
        let mut spec = match &self.spec {
            Some(p) => SceneSpec::load(p)?,
            None => SceneSpec::demo(),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(noise) = &self.noise {
            spec.noise = noise.clone();
        }
        if self.downscale > 1 {
            spec = spec.downscaled(self.downscale);
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    /// Executions per stage in a timing report.
    pub executions: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            executions: DEFAULT_EXECUTIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: Option<PathBuf>,
    pub generator: Option<GeneratorConfig>,
    pub toggles: Toggles,
    pub depth: DepthConfig,
    /// Classifier file; the dataset's own model when absent.
    pub model: Option<PathBuf>,
    pub precision: Precision,
    pub kmeans: KMeansParams,
    /// Upper bound on the emitted frame rate.
    pub target_fps: Option<f64>,
    /// Minimum delay between frames, in milliseconds.
    pub pace_ms: Option<u64>,
    /// Restart from the first frame when the source is exhausted.
    pub loop_frames: bool,
    pub timing: TimingConfig,
    pub ply_format: PlyFormat,
}

impl PipelineConfig {
    pub fn for_dataset(path: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            dataset: Some(path.into()),
            ..Default::default()
        }
    }

    pub fn for_generator(generator: GeneratorConfig) -> Self {
        PipelineConfig {
            generator: Some(generator),
            ..Default::default()
        }
    }

    /// Reads a JSON config. Relative paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_slice(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.dataset.as_mut().map(resolve);
        cfg.model.as_mut().map(resolve);
        if let Some(g) = cfg.generator.as_mut() {
            g.spec.as_mut().map(resolve);
        }
        Ok(cfg)
    }

    /// Minimum wall time between emitted frames.
    pub fn frame_interval(&self) -> std::time::Duration {
        let pace = self.pace_ms.unwrap_or(0) as f64 / 1e3;
        let cap = self.target_fps.map_or(0.0, |f| 1.0 / f);
        std::time::Duration::from_secs_f64(pace.max(cap))
    }

    /// Checks values and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        self.depth.validate()?;
        match (&self.dataset, &self.generator) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput(
                    "dataset and generator are mutually exclusive".into(),
                ))
            }
            (None, None) => return Err(Error::InvalidInput("either dataset or generator is required".into())),
            (Some(d), None) => {
                if !d.join(MANIFEST).is_file() {
                    return Err(Error::MissingFile(d.join(MANIFEST)));
                }
            }
            (None, Some(g)) => {
                if g.frames == 0 || g.downscale == 0 {
                    return Err(Error::InvalidInput(
                        "generator needs frames > 0 and downscale > 0".into(),
                    ));
                }
                if let Some(p) = g.spec.as_ref().filter(|p| !p.is_file()) {
                    return Err(Error::MissingFile(p.clone()));
                }
            }
        }
        if let Some(m) = self.model.as_ref().filter(|m| !m.is_file()) {
            return Err(Error::MissingFile(m.clone()));
        }
        if self.target_fps.is_some_and(|f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidInput("target_fps must be positive".into()));
        }
        if self.timing.executions == 0 {
            return Err(Error::InvalidInput("timing.executions must be positive".into()));
        }
        if self.kmeans.k == 0 {
            return Err(Error::InvalidInput("kmeans.k must be positive".into()));
        }
        Ok(())
    }
}
