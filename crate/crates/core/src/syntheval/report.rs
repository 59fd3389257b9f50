use std::fs::File;
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::psnr::{masked_psnr, PsnrMode};
use super::synth::synthesize_view;
use crate::depthproc::{inpaint, remove_outliers, temporal_filter, DepthConfig, DepthFrame, MISSING};
use crate::error::{Error, Result};
use crate::geometry::{align_rgb_to_depth, align_rgb_to_depth_filled, CameraModel};
use crate::par;
use crate::synthscene::{grid_name, Dataset, GRID_SIZE};

/// Source of the center depth fed to view synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    /// Exact generator depth: the reference modality.
    GroundTruth,
    /// Last noisy sensor frame as captured.
    Raw,
    /// Noisy frames after outlier removal, temporal smoothing and inpainting.
    Corrected,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::GroundTruth, Modality::Raw, Modality::Corrected];

    pub fn name(self) -> &'static str {
        match self {
            Modality::GroundTruth => "ground_truth",
            Modality::Raw => "raw",
            Modality::Corrected => "corrected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub splat_radius_px: usize,
    pub psnr_mode: PsnrMode,
    pub depth: DepthConfig,
    /// Frame whose center view is synthesized; the last frame when absent. The
    /// corrected modality's temporal filter uses the frame before it.
    pub frame: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            splat_radius_px: 1,
            psnr_mode: PsnrMode::Plain,
            depth: DepthConfig::default(),
            frame: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewScore {
    pub modality: Modality,
    pub view_row: usize,
    pub view_col: usize,
    pub psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalitySummary {
    pub modality: Modality,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalityReport {
    pub scores: Vec<ViewScore>,
    pub summaries: Vec<ModalitySummary>,
}

/// Mean, population std, min and max of `values`, summed in order.
pub fn summarize(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, var.sqrt(), min, max)
}

impl ModalityReport {
    /// Aggregates per-view scores, keeping the first-seen modality order.
    pub fn from_scores(scores: Vec<ViewScore>) -> Self {
        let mut order: Vec<Modality> = Vec::new();
        for s in &scores {
            if !order.contains(&s.modality) {
                order.push(s.modality);
            }
        }
        let summaries = order
            .into_iter()
            .map(|m| {
                let v: Vec<f64> = scores.iter().filter(|s| s.modality == m).map(|s| s.psnr_db).collect();
                let (mean, std, min, max) = summarize(&v);
                ModalitySummary {
                    modality: m,
                    mean,
                    std,
                    min,
                    max,
                }
            })
            .collect();
        ModalityReport { scores, summaries }
    }

    pub fn summary(&self, m: Modality) -> Option<&ModalitySummary> {
        self.summaries.iter().find(|s| s.modality == m)
    }

    /// Columns `modality, view_row, view_col, psnr_db`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for s in &self.scores {
            w.serialize(s)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Columns `modality, mean, std, min, max`.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for s in &self.summaries {
            w.serialize(s)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Vec<ViewScore>> {
        let mut r = csv::Reader::from_path(path)?;
        Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
    }
}

/// Center view for one modality: depth in the depth camera with the RGB image aligned
/// to it. Pixels the RGB camera does not see are cleared from the depth.
#[derive(Debug, Clone)]
pub struct CenterRgbd {
    pub rgb: RgbImage,
    pub depth: DepthFrame,
}

fn rgbd_from(depth: DepthFrame, rgb: &RgbImage, rgb_cam: &CameraModel, depth_cam: &CameraModel) -> Result<CenterRgbd> {
    let aligned = align_rgb_to_depth(rgb, rgb_cam, &depth, depth_cam)?;
    let values = depth
        .values()
        .iter()
        .zip(&aligned.mask)
        .map(|(&d, &m)| if m { d } else { MISSING })
        .collect();
    Ok(CenterRgbd {
        rgb: aligned.image,
        depth: DepthFrame::new(depth.width(), depth.height(), values)?,
    })
}

/// Full correction chain: both outlier filters, temporal average with the filtered
/// previous frame, then inpainting guided by the aligned RGB image.
pub fn corrected_depth(
    noisy: &DepthFrame,
    previous_noisy: Option<&DepthFrame>,
    rgb: &RgbImage,
    rgb_cam: &CameraModel,
    depth_cam: &CameraModel,
    cfg: &DepthConfig,
) -> Result<DepthFrame> {
    let filter = |d: &DepthFrame| remove_outliers(d, depth_cam, cfg, true, true);
    let current = filter(noisy)?;
    let previous = previous_noisy.map(filter).transpose()?;
    let smoothed = temporal_filter(&current, previous.as_ref(), cfg.temporal_threshold_mm)?;
    let guide = align_rgb_to_depth_filled(rgb, rgb_cam, &smoothed, depth_cam)?;
    Ok(inpaint(&smoothed, &guide.image, &cfg.inpaint)?.depth)
}

pub fn center_rgbd(ds: &Dataset, modality: Modality, cfg: &EvalConfig) -> Result<CenterRgbd> {
    let rig = ds.rig()?;
    let frame = cfg.frame.unwrap_or(ds.frame_count() - 1);
    let data = ds.load_frame(frame)?;
    let depth = match modality {
        Modality::GroundTruth => data.depth_clean,
        Modality::Raw => data.depth_noisy,
        Modality::Corrected => {
            let prev = if frame > 0 {
                Some(ds.load_frame(frame - 1)?.depth_noisy)
            } else {
                None
            };
            corrected_depth(
                &data.depth_noisy,
                prev.as_ref(),
                &data.rgb,
                &rig.rgb,
                &rig.depth,
                &cfg.depth,
            )?
        }
    };
    rgbd_from(depth, &data.rgb, &rig.rgb, &rig.depth)
}

/// Synthesizes every side view of the 5×5 grid from each modality's center RGBD and
/// scores it against the captured view over the synthesized coverage.
pub fn modality_report(ds: &Dataset, modalities: &[Modality], cfg: &EvalConfig) -> Result<ModalityReport> {
    cfg.depth.validate()?;
    let rig = ds.rig()?;
    let frame = cfg.frame.unwrap_or(ds.frame_count() - 1);
    let mid = GRID_SIZE / 2;
    let views: Vec<(usize, usize)> = (0..GRID_SIZE)
        .flat_map(|r| (0..GRID_SIZE).map(move |c| (r, c)))
        .filter(|&v| v != (mid, mid))
        .collect();
    let mut targets = Vec::with_capacity(views.len());
    for &(r, c) in &views {
        let name = grid_name(r, c);
        let cam = ds
            .cameras()
            .get(&name)
            .map_err(|_| Error::MissingFile(ds.root().join(format!("cameras.json#{name}"))))?;
        targets.push((cam.clone(), ds.rgb_view(frame, &name)?));
    }
    let mut scores = Vec::with_capacity(modalities.len() * views.len());
    for &m in modalities {
        let center = center_rgbd(ds, m, cfg)?;
        let per_view = par::map_slice(&targets, |(cam, truth)| -> Result<f64> {
            let s = synthesize_view(&center.rgb, &center.depth, &rig.depth, cam, cfg.splat_radius_px)?;
            masked_psnr(&s.image, truth, &s.coverage, cfg.psnr_mode)
        });
        for (&(r, c), psnr) in views.iter().zip(per_view) {
            scores.push(ViewScore {
                modality: m,
                view_row: r,
                view_col: c,
                psnr_db: psnr?,
            });
        }
    }
    Ok(ModalityReport::from_scores(scores))
}
