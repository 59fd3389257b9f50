use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cube::{HyperCube, Layout, Precision};
use crate::error::{Error, Result};
use crate::par;

/// Mapping from mosaic cell `(row mod n, col mod n)` to band index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandMap {
    pattern: usize,
    cells: Vec<usize>,
}

impl BandMap {
    /// Row-major identity mapping: cell `(r, c)` holds band `r * n + c`.
    pub fn identity(pattern: usize) -> Self {
        BandMap {
            pattern,
            cells: (0..pattern * pattern).collect(),
        }
    }

    pub fn new(rows: Vec<Vec<usize>>) -> Result<Self> {
        let pattern = rows.len();
        if pattern == 0 || rows.iter().any(|r| r.len() != pattern) {
            return Err(Error::InvalidInput("band map must be square".into()));
        }
        let cells: Vec<usize> = rows.into_iter().flatten().collect();
        let mut seen = vec![false; cells.len()];
        for &b in &cells {
            if b >= seen.len() || seen[b] {
                return Err(Error::InvalidInput(format!(
                    "band map is not a bijection onto 0..{}",
                    seen.len()
                )));
            }
            seen[b] = true;
        }
        Ok(BandMap { pattern, cells })
    }

    pub fn pattern(&self) -> usize {
        self.pattern
    }

    pub fn bands(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn band_at(&self, row: usize, col: usize) -> usize {
        self.cells[(row % self.pattern) * self.pattern + col % self.pattern]
    }

    /// Inverse lookup: mosaic cell `(row, col)` carrying `band`.
    pub fn cell_of(&self, band: usize) -> (usize, usize) {
        let i = self.cells.iter().position(|&b| b == band).expect("band in range");
        (i / self.pattern, i % self.pattern)
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.cells.chunks(self.pattern).map(<[usize]>::to_vec).collect()
    }
}

/// Sidecar descriptor stored next to a `.raw` mosaic file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosaicDescriptor {
    pub width: usize,
    pub height: usize,
    pub pattern: usize,
    pub band_map: Vec<Vec<usize>>,
}

/// One raw exposure of the snapshot mosaic sensor (16-bit counts, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct RawMosaicFrame {
    width: usize,
    height: usize,
    band_map: BandMap,
    values: Vec<u16>,
}

impl RawMosaicFrame {
    pub fn new(width: usize, height: usize, band_map: BandMap, values: Vec<u16>) -> Result<Self> {
        let n = band_map.pattern();
        if width < n || height < n {
            return Err(Error::DimensionTooSmall {
                width,
                height,
                pattern: n,
            });
        }
        if values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mosaic has {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        Ok(RawMosaicFrame {
            width,
            height,
            band_map,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn band_map(&self) -> &BandMap {
        &self.band_map
    }
    pub fn values(&self) -> &[u16] {
        &self.values
    }
    pub fn pattern(&self) -> usize {
        self.band_map.pattern()
    }

    /// Spectral grid size after demosaicing (trailing partial blocks are dropped).
    pub fn cube_size(&self) -> (usize, usize) {
        (self.width / self.pattern(), self.height / self.pattern())
    }

    pub fn descriptor(&self) -> MosaicDescriptor {
        MosaicDescriptor {
            width: self.width,
            height: self.height,
            pattern: self.pattern(),
            band_map: self.band_map.rows(),
        }
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Writes little-endian `u16` samples to `path` and the descriptor next to it.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let sidecar = Self::sidecar_path(path);
        let json = serde_json::to_vec_pretty(&self.descriptor())?;
        fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))
    }

    pub fn read_raw(path: &Path) -> Result<Self> {
        let sidecar = Self::sidecar_path(path);
        let desc: MosaicDescriptor = serde_json::from_slice(&fs::read(&sidecar).map_err(|e| Error::io(&sidecar, e))?)?;
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
        let map = BandMap::new(desc.band_map)?;
        if map.pattern() != desc.pattern {
            return Err(Error::InvalidInput("descriptor pattern disagrees with band map".into()));
        }
        RawMosaicFrame::new(desc.width, desc.height, map, values)
    }
}

/// Dark and white reference captures used for radiometric calibration.
#[derive(Debug, Clone)]
pub struct ReferencePair {
    pub dark: RawMosaicFrame,
    pub white: RawMosaicFrame,
}

/// Number of stored bands for `active` bands: rounded up to a multiple of 32.
pub(crate) fn stored_bands_for(active: usize) -> usize {
    active.next_multiple_of(super::DEFAULT_STORED_BANDS)
}

/// Regroups each n×n mosaic block into one spectral pixel.
///
/// Output is pixel-interleaved, 32-bit, with the band count padded to a multiple
/// of 32 (zeros in the padding).
pub fn demosaic(raw: &RawMosaicFrame) -> Result<HyperCube> {
    let n = raw.pattern();
    let (w, h) = raw.cube_size();
    if w == 0 || h == 0 {
        return Err(Error::DimensionTooSmall {
            width: raw.width,
            height: raw.height,
            pattern: n,
        });
    }
    let bands = n * n;
    let stored = stored_bands_for(bands);
    let mut cube = HyperCube::zeros(w, h, bands, stored, Layout::PixelInterleaved, Precision::F32)?;
    // (dy, dx) offset inside the block for each band
    let cells: Vec<(usize, usize)> = (0..bands).map(|b| raw.band_map.cell_of(b)).collect();
    let values = &raw.values;
    let raw_w = raw.width;
    if let super::cube::Samples::F32(data) = &mut cube.samples {
        par::for_each_chunk_mut(data, w * stored, |y, row| {
            for (x, px) in row.chunks_mut(stored).enumerate() {
                for (b, &(dy, dx)) in cells.iter().enumerate() {
                    px[b] = values[(y * n + dy) * raw_w + x * n + dx] as f32;
                }
            }
        });
    }
    Ok(cube)
}
