//! Deterministic synthetic capture datasets with known ground truth.
//!
//! A [`SceneSpec`] of planes and spheres is ray-cast analytically for every camera.
//! Materials carry Gaussian-bump reflectance spectra, an RGB albedo and a class label.
//! All randomness comes from one seed through counter-based ChaCha streams, one stream
//! per purpose and frame, so any frame can be regenerated alone.

mod dataset;
mod noise;
mod render;
mod spec;

pub use dataset::{
    frame_dir_name, generate_dataset, generate_dataset_with, labeled_samples, read_rgb, rgb_file, Dataset, FileMap,
    FrameData, Manifest, ModelTraining, SyntheticSource, CAMERAS, CORRECTION, DARK, DEPTH_CLEAN, DEPTH_NOISY, LABELS,
    MANIFEST, MODEL, MOSAIC, WHITE,
};
pub use noise::{apply_depth_noise, interference_columns, FLYING_POINT_SPACING_PX};
pub use render::{Hit, Scene};
pub use spec::{
    band_centers_nm, grid_cameras, grid_name, InterferenceLine, Material, NoiseSpec, SceneObject, SceneSpec,
    SensorSpec, SpectralBump, Texture, BAND_RANGE_NM, GRID_SIZE, GRID_SPACING_M,
};

/// Independent random streams.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    References = 1,
    HsReadNoise = 2,
    DepthFixedPattern = 3,
    DepthJitter = 4,
    FlyingPoints = 5,
    Dropout = 6,
}

impl Stream {
    pub(crate) fn id(self, frame: u64) -> u64 {
        ((self as u64) << 48) | (frame & ((1 << 48) - 1))
    }
}
