use super::config::PipelineConfig;
use crate::classify::SvmModel;
use crate::error::{Error, Result};
use crate::geometry::Rig;
use crate::hypercube::{CorrectionMatrix, ReferencePair};
use crate::synthscene::{Dataset, FrameData, ModelTraining, SyntheticSource};

/// Where frames come from.
#[derive(Debug, Clone)]
pub enum FrameSource {
    Dataset(Dataset),
    Synthetic(Box<SyntheticSource>),
}

impl FrameSource {
    pub fn open(cfg: &PipelineConfig) -> Result<Self> {
        match (&cfg.dataset, &cfg.generator) {
            (Some(d), None) => Ok(FrameSource::Dataset(Dataset::open(d)?)),
            (None, Some(g)) => Ok(FrameSource::Synthetic(Box::new(SyntheticSource::new(
                &g.scene()?,
                g.frames,
                &ModelTraining::default(),
            )?))),
            _ => Err(Error::InvalidInput(
                "exactly one of dataset or generator is required".into(),
            )),
        }
    }

    pub fn frame_count(&self) -> usize {
        match self {
            FrameSource::Dataset(d) => d.frame_count(),
            FrameSource::Synthetic(s) => s.frame_count(),
        }
    }

    pub fn load(&self, index: usize) -> Result<FrameData> {
        match self {
            FrameSource::Dataset(d) => d.load_frame(index),
            FrameSource::Synthetic(s) => s.frame(index),
        }
    }

    pub fn rig(&self) -> Result<Rig> {
        match self {
            FrameSource::Dataset(d) => d.rig(),
            FrameSource::Synthetic(s) => Ok(s.rig().clone()),
        }
    }

    pub fn references(&self) -> Result<ReferencePair> {
        match self {
            FrameSource::Dataset(d) => d.references(),
            FrameSource::Synthetic(s) => Ok(s.references().clone()),
        }
    }

    pub fn correction(&self) -> Result<CorrectionMatrix> {
        match self {
            FrameSource::Dataset(d) => d.correction(),
            FrameSource::Synthetic(s) => Ok(s.correction().clone()),
        }
    }

    pub fn model(&self) -> Result<SvmModel> {
        match self {
            FrameSource::Dataset(d) => d.model(),
            FrameSource::Synthetic(s) => Ok(s.model().clone()),
        }
    }
}
