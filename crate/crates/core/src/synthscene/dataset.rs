use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use super::noise::apply_depth_noise;
use super::render::Scene;
use super::spec::SceneSpec;
use crate::classify::{svm_train_toy, LabelMap, SvmModel, TrainParams, UNLABELED};
use crate::depthproc::DepthFrame;
use crate::error::{Error, Result};
use crate::geometry::{CameraSet, Rig};
use crate::hypercube::{
    preprocess, CalibrationRefs, CorrectionMatrix, Precision, RawMosaicFrame, ReferencePair, DEFAULT_STORED_BANDS,
};

pub const MANIFEST: &str = "manifest.json";
pub const CAMERAS: &str = "cameras.json";
pub const CORRECTION: &str = "correction.csv";
pub const DARK: &str = "refs/dark.raw";
pub const WHITE: &str = "refs/white.raw";
pub const MODEL: &str = "model.json";
pub const MOSAIC: &str = "mosaic.raw";
pub const DEPTH_CLEAN: &str = "depth_clean.png";
pub const DEPTH_NOISY: &str = "depth_noisy.png";
pub const LABELS: &str = "labels.png";

pub fn rgb_file(camera: &str) -> String {
    format!("rgb_{camera}.png")
}

pub fn frame_dir_name(index: usize) -> String {
    format!("frames/{index:04}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileMap {
    pub cameras: String,
    pub correction: String,
    pub dark: String,
    pub white: String,
    pub model: String,
    /// Files inside every `frames/NNNN/` directory.
    pub frame_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub frames: usize,
    pub spec: SceneSpec,
    pub files: FileMap,
}

/// Settings for the toy model trained on frame 0 and stored as `model.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTraining {
    pub params: TrainParams,
}

impl Default for ModelTraining {
    fn default() -> Self {
        ModelTraining {
            params: TrainParams {
                gamma: 0.5,
                max_samples_per_class: 150,
                ..TrainParams::default()
            },
        }
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn png_bytes(img: &RgbImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).expect("in-memory png");
    buf.into_inner()
}

/// Labeled pixels of a preprocessed cube as training samples.
pub fn labeled_samples(cube: &crate::hypercube::HyperCube, labels: &LabelMap) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut px = vec![0.0f32; cube.bands_active()];
    let mut samples = Vec::new();
    let mut classes = Vec::new();
    for (i, &l) in labels.labels().iter().enumerate() {
        if l == UNLABELED {
            continue;
        }
        cube.read_pixel(i, &mut px);
        samples.push(px.iter().map(|&v| v as f64).collect());
        classes.push(l as usize);
    }
    (samples, classes)
}

/// Writes a complete dataset for `frames` frames of the static scene in `spec`.
///
/// Output bytes depend only on `(spec, frames)`.
pub fn generate_dataset(spec: &SceneSpec, frames: usize, out: &Path) -> Result<Manifest> {
    generate_dataset_with(spec, frames, out, &ModelTraining::default())
}

pub fn generate_dataset_with(
    spec: &SceneSpec,
    frames: usize,
    out: &Path,
    training: &ModelTraining,
) -> Result<Manifest> {
    let source = SyntheticSource::new(spec, frames, training)?;
    let cameras = &source.cameras;

    fs::create_dir_all(out.join("refs")).map_err(|e| Error::io(out.join("refs"), e))?;
    cameras.save(&out.join(CAMERAS))?;
    source.correction.write_csv(&out.join(CORRECTION))?;
    source.refs.dark.write_raw(&out.join(DARK))?;
    source.refs.white.write_raw(&out.join(WHITE))?;
    write(&out.join(MODEL), source.model.to_json()?.as_bytes())?;

    // the scene is static: views, labels and clean depth are encoded once
    let rgb_names: Vec<&String> = cameras.cameras.keys().filter(|n| *n != "depth" && *n != "hs").collect();
    let views: Vec<(String, Vec<u8>)> = rgb_names
        .iter()
        .map(|name| {
            (
                rgb_file(name),
                png_bytes(&source.scene.render_rgb(&cameras.cameras[*name])),
            )
        })
        .collect();
    let clean_path = out.join("clean_tmp.png");
    source.clean.write_png(&clean_path)?;
    let clean_bytes = fs::read(&clean_path).map_err(|e| Error::io(&clean_path, e))?;
    fs::remove_file(&clean_path).map_err(|e| Error::io(&clean_path, e))?;
    let labels_path = out.join("labels_tmp.png");
    source.labels.write_png(&labels_path)?;
    let label_bytes = fs::read(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    fs::remove_file(&labels_path).map_err(|e| Error::io(&labels_path, e))?;

    for index in 0..frames {
        let dir = out.join(frame_dir_name(index));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        source.mosaic(index).write_raw(&dir.join(MOSAIC))?;
        source.noisy_depth(index).write_png(&dir.join(DEPTH_NOISY))?;
        write(&dir.join(DEPTH_CLEAN), &clean_bytes)?;
        write(&dir.join(LABELS), &label_bytes)?;
        for (file, bytes) in &views {
            write(&dir.join(file), bytes)?;
        }
    }

    let mut frame_files = vec![
        MOSAIC.to_string(),
        "mosaic.json".to_string(),
        DEPTH_CLEAN.to_string(),
        DEPTH_NOISY.to_string(),
        LABELS.to_string(),
    ];
    frame_files.extend(views.iter().map(|(f, _)| f.clone()));
    let manifest = Manifest {
        frames,
        spec: spec.clone(),
        files: FileMap {
            cameras: CAMERAS.into(),
            correction: CORRECTION.into(),
            dark: DARK.into(),
            white: WHITE.into(),
            model: MODEL.into(),
            frame_files,
        },
    };
    write(&out.join(MANIFEST), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Frames of a generated scene produced in memory, equal to what [`generate_dataset`]
/// stores on disk for the same arguments.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    spec: SceneSpec,
    scene: Scene,
    cameras: CameraSet,
    rig: Rig,
    correction: CorrectionMatrix,
    refs: ReferencePair,
    model: SvmModel,
    rgb: RgbImage,
    clean: DepthFrame,
    labels: LabelMap,
    frames: usize,
}

impl SyntheticSource {
    pub fn new(spec: &SceneSpec, frames: usize, training: &ModelTraining) -> Result<Self> {
        if frames == 0 {
            return Err(Error::InvalidInput("at least one frame is required".into()));
        }
        let scene = Scene::new(spec.clone())?;
        let cameras = spec.all_cameras()?;
        let rig = Rig::from_set(&cameras)?;
        let stored = (spec.sensor.bands()).next_multiple_of(DEFAULT_STORED_BANDS);
        let correction = scene.correction_matrix(stored)?;
        let refs = scene.references();
        let labels = scene.render_labels(&rig.hs);
        let calib = CalibrationRefs::new(&refs)?;
        let cube = preprocess(&scene.render_mosaic(&refs, 0), &calib, &correction, Precision::F32)?;
        let (samples, classes) = labeled_samples(&cube, &labels);
        let model = svm_train_toy(&samples, &classes, spec.classes.clone(), &training.params)?;
        Ok(SyntheticSource {
            spec: spec.clone(),
            rgb: scene.render_rgb(&rig.rgb),
            clean: scene.render_depth(&rig.depth),
            scene,
            cameras,
            rig,
            correction,
            refs,
            model,
            labels,
            frames,
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }
    pub fn frame_count(&self) -> usize {
        self.frames
    }
    pub fn cameras(&self) -> &CameraSet {
        &self.cameras
    }
    pub fn rig(&self) -> &Rig {
        &self.rig
    }
    pub fn correction(&self) -> &CorrectionMatrix {
        &self.correction
    }
    pub fn references(&self) -> &ReferencePair {
        &self.refs
    }
    pub fn model(&self) -> &SvmModel {
        &self.model
    }

    pub fn mosaic(&self, index: usize) -> RawMosaicFrame {
        self.scene.render_mosaic(&self.refs, index as u64)
    }

    pub fn noisy_depth(&self, index: usize) -> DepthFrame {
        apply_depth_noise(&self.clean, &self.spec.noise, index as u64, self.spec.seed)
    }

    pub fn frame(&self, index: usize) -> Result<FrameData> {
        if index >= self.frames {
            return Err(Error::InvalidInput(format!(
                "frame {index} out of range ({} frames)",
                self.frames
            )));
        }
        Ok(FrameData {
            index,
            mosaic: self.mosaic(index),
            rgb: self.rgb.clone(),
            depth_noisy: self.noisy_depth(index),
            depth_clean: self.clean.clone(),
            labels: self.labels.clone(),
        })
    }
}

/// Everything stored for one frame.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub index: usize,
    pub mosaic: RawMosaicFrame,
    /// View of the `rgb` camera.
    pub rgb: RgbImage,
    pub depth_noisy: DepthFrame,
    pub depth_clean: DepthFrame,
    pub labels: LabelMap,
}

/// Read access to a generated dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    manifest: Manifest,
    cameras: CameraSet,
}

fn existing(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingFile(path))
    }
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let path = existing(path.to_path_buf())?;
    Ok(image::open(&path)?.into_rgb8())
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let mpath = existing(root.join(MANIFEST))?;
        let manifest: Manifest = serde_json::from_slice(&fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?)?;
        let cameras = CameraSet::load(&existing(root.join(&manifest.files.cameras))?)?;
        Ok(Dataset {
            root: root.to_path_buf(),
            manifest,
            cameras,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }
    pub fn frame_count(&self) -> usize {
        self.manifest.frames
    }
    pub fn cameras(&self) -> &CameraSet {
        &self.cameras
    }
    pub fn rig(&self) -> Result<Rig> {
        Rig::from_set(&self.cameras)
    }
    pub fn model_path(&self) -> PathBuf {
        self.root.join(&self.manifest.files.model)
    }
    pub fn model(&self) -> Result<SvmModel> {
        SvmModel::load(&existing(self.model_path())?)
    }
    pub fn frame_dir(&self, index: usize) -> PathBuf {
        self.root.join(frame_dir_name(index))
    }

    pub fn correction(&self) -> Result<CorrectionMatrix> {
        let path = existing(self.root.join(&self.manifest.files.correction))?;
        CorrectionMatrix::read_csv(&path, self.manifest.spec.sensor.bands())
    }

    pub fn references(&self) -> Result<ReferencePair> {
        let dark = RawMosaicFrame::read_raw(&existing(self.root.join(&self.manifest.files.dark))?)?;
        let white = RawMosaicFrame::read_raw(&existing(self.root.join(&self.manifest.files.white))?)?;
        Ok(ReferencePair { dark, white })
    }

    pub fn rgb_view(&self, index: usize, camera: &str) -> Result<RgbImage> {
        read_rgb(&self.frame_dir(index).join(rgb_file(camera)))
    }

    pub fn load_frame(&self, index: usize) -> Result<FrameData> {
        if index >= self.frame_count() {
            return Err(Error::InvalidInput(format!(
                "frame {index} out of range ({} frames)",
                self.frame_count()
            )));
        }
        let dir = self.frame_dir(index);
        Ok(FrameData {
            index,
            mosaic: RawMosaicFrame::read_raw(&existing(dir.join(MOSAIC))?)?,
            rgb: self.rgb_view(index, "rgb")?,
            depth_noisy: DepthFrame::read_png(&existing(dir.join(DEPTH_NOISY))?)?,
            depth_clean: DepthFrame::read_png(&existing(dir.join(DEPTH_CLEAN))?)?,
            labels: LabelMap::read_png(&existing(dir.join(LABELS))?)?,
        })
    }
}
