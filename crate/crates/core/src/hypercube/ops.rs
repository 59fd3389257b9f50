use super::correction::CorrectionMatrix;
use super::cube::{HyperCube, Layout, Precision};
use super::mosaic::{demosaic, ReferencePair};
use crate::error::{Error, Result};

const MAX_BANDS: usize = 64;

/// Demosaiced dark offsets and reciprocal spans, computed once per reference pair.
#[derive(Debug, Clone)]
pub struct CalibrationRefs {
    width: usize,
    height: usize,
    bands: usize,
    dark: Vec<f32>,
    inv_span: Vec<f32>,
    repaired: usize,
}

impl CalibrationRefs {
    /// Demosaics both references. Samples where `white <= dark` get a span of 1.
    pub fn new(refs: &ReferencePair) -> Result<Self> {
        let dark = demosaic(&refs.dark)?;
        let white = demosaic(&refs.white)?;
        if (dark.width(), dark.height()) != (white.width(), white.height()) {
            return Err(Error::GeometryMismatch(format!(
                "dark reference is {}x{}, white is {}x{}",
                dark.width(),
                dark.height(),
                white.width(),
                white.height()
            )));
        }
        let bands = dark.bands_active();
        let dark_px = dark.active_pixels_f32();
        let white_px = white.active_pixels_f32();
        let mut repaired = 0;
        let inv_span = dark_px
            .iter()
            .zip(&white_px)
            .map(|(&d, &w)| {
                if w > d {
                    1.0 / (w - d)
                } else {
                    repaired += 1;
                    1.0
                }
            })
            .collect();
        if repaired > 0 {
            log::warn!("{repaired} reference samples have white <= dark; using unit span");
        }
        Ok(CalibrationRefs {
            width: dark.width(),
            height: dark.height(),
            bands,
            dark: dark_px,
            inv_span,
            repaired,
        })
    }

    /// Number of samples whose references had to be repaired.
    pub fn repaired_samples(&self) -> usize {
        self.repaired
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Remaps every active sample to `[0, 1]` between the dark and white references.
pub fn calibrate(cube: &HyperCube, refs: &CalibrationRefs, precision: Precision) -> Result<HyperCube> {
    cube.require_layout(Layout::PixelInterleaved)?;
    if (cube.width(), cube.height(), cube.bands_active()) != (refs.width, refs.height, refs.bands) {
        return Err(Error::GeometryMismatch(format!(
            "cube is {}x{}x{}, references are {}x{}x{}",
            cube.width(),
            cube.height(),
            cube.bands_active(),
            refs.width,
            refs.height,
            refs.bands
        )));
    }
    let n = refs.bands;
    let mut out = HyperCube::zeros(
        cube.width(),
        cube.height(),
        n,
        cube.bands_stored(),
        Layout::PixelInterleaved,
        precision,
    )?;
    out.map_pixels(|i, px| {
        cube.read_pixel(i, px);
        let dark = &refs.dark[i * n..(i + 1) * n];
        let inv = &refs.inv_span[i * n..(i + 1) * n];
        for ((v, d), s) in px[..n].iter_mut().zip(dark).zip(inv) {
            *v = ((*v - d) * s).clamp(0.0, 1.0);
        }
    })?;
    Ok(out)
}

/// Replaces each pixel vector `v` by `v · M`.
///
/// Only the active block is multiplied; the identity padding leaves the zero
/// padding bands unchanged.
pub fn spectral_correct(cube: &HyperCube, matrix: &CorrectionMatrix) -> Result<HyperCube> {
    cube.require_layout(Layout::PixelInterleaved)?;
    if matrix.size() != cube.bands_stored() || matrix.active() != cube.bands_active() {
        return Err(Error::GeometryMismatch(format!(
            "correction matrix {}x{} (active {}) does not match cube bands {} (active {})",
            matrix.size(),
            matrix.size(),
            matrix.active(),
            cube.bands_stored(),
            cube.bands_active()
        )));
    }
    let n = cube.bands_active();
    // column-major copy of the active block so each output band is a dot product
    let mut columns = vec![0.0f32; n * n];
    for c in 0..n {
        for r in 0..n {
            columns[c * n + r] = matrix.get(r, c);
        }
    }
    if n > MAX_BANDS {
        return Err(Error::InvalidInput(format!("{n} active bands exceed {MAX_BANDS}")));
    }
    let mut out = cube.clone();
    out.map_pixels(|_, px| {
        let mut buf = [0.0f32; MAX_BANDS];
        buf[..n].copy_from_slice(&px[..n]);
        let v = &buf[..n];
        for (c, o) in px[..n].iter_mut().enumerate() {
            let col = &columns[c * n..(c + 1) * n];
            *o = v.iter().zip(col).map(|(a, b)| a * b).sum();
        }
    })?;
    Ok(out)
}

/// Divides each pixel by the root-mean-square of its active bands.
///
/// All-zero pixels are returned unchanged. Band-sequential input is accepted and
/// returned in the same layout.
pub fn normalize(cube: &HyperCube) -> HyperCube {
    if cube.layout() == Layout::BandSequential {
        let bip = cube
            .to_pixel_interleaved(cube.bands_active())
            .expect("band-sequential input");
        return normalize(&bip).to_band_sequential().expect("pixel-interleaved output");
    }
    let n = cube.bands_active();
    let mut out = cube.clone();
    out.map_pixels(|_, px| {
        let mean_sq = px[..n].iter().map(|v| v * v).sum::<f32>() / n as f32;
        if mean_sq > 0.0 {
            let inv = 1.0 / mean_sq.sqrt();
            px[..n].iter_mut().for_each(|v| *v *= inv);
        }
    })
    .expect("pixel-interleaved");
    out
}
