//! Snapshot-mosaic preprocessing: raw sensor frames to calibrated spectral cubes.
//!
//! The chain is `demosaic → calibrate → spectral_correct → normalize → to_band_sequential`.
//! Cubes keep an explicit [`Layout`] tag and a stored band count that may exceed the
//! number of active bands (padding bands are always zero).

mod correction;
mod cube;
mod mosaic;
mod ops;

pub use correction::CorrectionMatrix;
pub use cube::{HyperCube, Layout, Precision};
pub use mosaic::{demosaic, BandMap, MosaicDescriptor, RawMosaicFrame, ReferencePair};
pub use ops::{calibrate, normalize, spectral_correct, CalibrationRefs};

/// Mosaic cell edge of the default snapshot sensor.
pub const DEFAULT_PATTERN: usize = 5;
/// Bands per stored pixel after padding.
pub const DEFAULT_STORED_BANDS: usize = 32;
/// Raw sensor size of the default snapshot camera.
pub const DEFAULT_RAW_WIDTH: usize = 2045;
pub const DEFAULT_RAW_HEIGHT: usize = 1085;

/// Whole preprocessing chain for one raw frame, ending band-sequential.
pub fn preprocess(
    raw: &RawMosaicFrame,
    refs: &CalibrationRefs,
    matrix: &CorrectionMatrix,
    precision: Precision,
) -> crate::Result<HyperCube> {
    let cube = calibrate(&demosaic(raw)?, refs, precision)?;
    normalize(&spectral_correct(&cube, matrix)?).to_band_sequential()
}
