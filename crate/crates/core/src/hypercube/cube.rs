use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Physical ordering of cube samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `[y][x][band]`, bands contiguous per pixel (BIP).
    PixelInterleaved,
    /// `[band][y][x]`, one plane per band (BSQ).
    BandSequential,
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::PixelInterleaved => "pixel-interleaved",
            Layout::BandSequential => "band-sequential",
        }
    }
}

/// Storage precision of cube samples. Arithmetic always happens in `f32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F16,
    F32,
}

pub(crate) trait Sample: Copy + Send + Sync + 'static {
    fn to_f32(self) -> f32;
    fn from_f32(v: f32) -> Self;
    const ZERO: Self;
}

impl Sample for f32 {
    #[inline]
    fn to_f32(self) -> f32 {
        self
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        v
    }
    const ZERO: Self = 0.0;
}

impl Sample for f16 {
    #[inline]
    fn to_f32(self) -> f32 {
        f16::to_f32(self)
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        f16::from_f32(v)
    }
    const ZERO: Self = f16::ZERO;
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Samples {
    F16(Vec<f16>),
    F32(Vec<f32>),
}

/// Dispatches a generic kernel over the concrete sample vector.
macro_rules! with_samples {
    ($samples:expr, $v:ident => $body:expr) => {
        match $samples {
            $crate::hypercube::cube::Samples::F16($v) => $body,
            $crate::hypercube::cube::Samples::F32($v) => $body,
        }
    };
}

/// A W×H×B spectral image.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    width: usize,
    height: usize,
    bands_active: usize,
    bands_stored: usize,
    layout: Layout,
    pub(crate) samples: Samples,
}

impl HyperCube {
    pub fn zeros(
        width: usize,
        height: usize,
        bands_active: usize,
        bands_stored: usize,
        layout: Layout,
        precision: Precision,
    ) -> Result<Self> {
        if bands_stored < bands_active || bands_active == 0 {
            return Err(Error::InvalidInput(format!(
                "stored bands ({bands_stored}) must be >= active bands ({bands_active}) > 0"
            )));
        }
        if layout == Layout::BandSequential && bands_stored != bands_active {
            return Err(Error::InvalidInput("band-sequential cubes carry no padding".into()));
        }
        let len = width * height * bands_stored;
        let samples = match precision {
            Precision::F16 => Samples::F16(vec![f16::ZERO; len]),
            Precision::F32 => Samples::F32(vec![0.0; len]),
        };
        Ok(HyperCube {
            width,
            height,
            bands_active,
            bands_stored,
            layout,
            samples,
        })
    }

    /// Builds a cube from a function of `(x, y, band)` over the active bands.
    pub fn from_fn(
        width: usize,
        height: usize,
        bands_active: usize,
        bands_stored: usize,
        layout: Layout,
        precision: Precision,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut cube = Self::zeros(width, height, bands_active, bands_stored, layout, precision)?;
        for y in 0..height {
            for x in 0..width {
                for b in 0..bands_active {
                    cube.set(x, y, b, f(x, y, b));
                }
            }
        }
        Ok(cube)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
    pub fn bands_active(&self) -> usize {
        self.bands_active
    }
    pub fn bands_stored(&self) -> usize {
        self.bands_stored
    }
    pub fn layout(&self) -> Layout {
        self.layout
    }
    pub fn precision(&self) -> Precision {
        match self.samples {
            Samples::F16(_) => Precision::F16,
            Samples::F32(_) => Precision::F32,
        }
    }

    #[inline]
    fn offset(&self, x: usize, y: usize, b: usize) -> usize {
        match self.layout {
            Layout::PixelInterleaved => (y * self.width + x) * self.bands_stored + b,
            Layout::BandSequential => (b * self.height + y) * self.width + x,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, b: usize) -> f32 {
        let i = self.offset(x, y, b);
        with_samples!(&self.samples, v => v[i].to_f32())
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, b: usize, value: f32) {
        let i = self.offset(x, y, b);
        with_samples!(&mut self.samples, v => v[i] = Sample::from_f32(value))
    }

    /// Copies the active bands of pixel `index` (row-major) into `out`.
    pub fn read_pixel(&self, index: usize, out: &mut [f32]) {
        let n = self.bands_active;
        match self.layout {
            Layout::PixelInterleaved => {
                let base = index * self.bands_stored;
                with_samples!(&self.samples, v => {
                    for (o, s) in out[..n].iter_mut().zip(&v[base..base + n]) {
                        *o = s.to_f32();
                    }
                })
            }
            Layout::BandSequential => {
                let plane = self.pixel_count();
                with_samples!(&self.samples, v => {
                    for (b, o) in out[..n].iter_mut().enumerate() {
                        *o = v[b * plane + index].to_f32();
                    }
                })
            }
        }
    }

    /// Active-band vectors of every pixel, row-major, as one flat `f32` buffer.
    pub fn active_pixels_f32(&self) -> Vec<f32> {
        let n = self.bands_active;
        let mut out = vec![0.0f32; self.pixel_count() * n];
        par::for_each_chunk_mut(&mut out, n * 1024, |c, chunk| {
            let first = c * 1024;
            for (k, px) in chunk.chunks_mut(n).enumerate() {
                self.read_pixel(first + k, px);
            }
        });
        out
    }

    /// All stored samples widened to `f32`, in physical order.
    pub fn samples_f32(&self) -> Vec<f32> {
        with_samples!(&self.samples, v => v.iter().map(|s| s.to_f32()).collect())
    }

    /// Raw bit patterns of the stored samples (for bit-exactness checks).
    pub fn sample_bits(&self) -> Vec<u32> {
        match &self.samples {
            Samples::F16(v) => v.iter().map(|s| s.to_bits() as u32).collect(),
            Samples::F32(v) => v.iter().map(|s| s.to_bits()).collect(),
        }
    }

    /// Same data re-stored at another precision.
    pub fn with_precision(&self, precision: Precision) -> HyperCube {
        if precision == self.precision() {
            return self.clone();
        }
        let samples = match precision {
            Precision::F16 => {
                Samples::F16(with_samples!(&self.samples, v => v.iter().map(|s| f16::from_f32(s.to_f32())).collect()))
            }
            Precision::F32 => Samples::F32(with_samples!(&self.samples, v => v.iter().map(|s| s.to_f32()).collect())),
        };
        HyperCube {
            samples,
            ..self.shape_like()
        }
    }

    fn shape_like(&self) -> HyperCube {
        HyperCube {
            width: self.width,
            height: self.height,
            bands_active: self.bands_active,
            bands_stored: self.bands_stored,
            layout: self.layout,
            samples: Samples::F32(Vec::new()),
        }
    }

    pub(crate) fn require_layout(&self, expected: Layout) -> Result<()> {
        if self.layout != expected {
            return Err(Error::Layout {
                expected: expected.name(),
                actual: self.layout.name(),
            });
        }
        Ok(())
    }

    /// Applies `f` to every pixel's stored band vector (pixel-interleaved only).
    ///
    /// `f` receives the pixel index and an `f32` copy of all stored bands; the
    /// buffer is written back at the cube's precision.
    pub(crate) fn map_pixels<F>(&mut self, f: F) -> Result<()>
    where
        F: Fn(usize, &mut [f32]) + Sync + Send,
    {
        self.require_layout(Layout::PixelInterleaved)?;
        let stored = self.bands_stored;
        let row = self.width * stored;
        if row == 0 {
            return Ok(());
        }
        let width = self.width;
        with_samples!(&mut self.samples, v => map_rows(v, row, stored, width, &f));
        Ok(())
    }

    /// Band-sequential copy without padding.
    pub fn to_band_sequential(&self) -> Result<HyperCube> {
        self.require_layout(Layout::PixelInterleaved)?;
        let (w, h, n, stored) = (self.width, self.height, self.bands_active, self.bands_stored);
        let plane = w * h;
        let samples = match &self.samples {
            Samples::F16(v) => Samples::F16(bip_to_bsq(v, plane, n, stored)),
            Samples::F32(v) => Samples::F32(bip_to_bsq(v, plane, n, stored)),
        };
        Ok(HyperCube {
            width: w,
            height: h,
            bands_active: n,
            bands_stored: n,
            layout: Layout::BandSequential,
            samples,
        })
    }

    /// Pixel-interleaved copy padded with zero bands up to `bands_stored`.
    pub fn to_pixel_interleaved(&self, bands_stored: usize) -> Result<HyperCube> {
        self.require_layout(Layout::BandSequential)?;
        if bands_stored < self.bands_active {
            return Err(Error::InvalidInput(format!(
                "cannot pad {} bands into {bands_stored}",
                self.bands_active
            )));
        }
        let (w, h, n) = (self.width, self.height, self.bands_active);
        let plane = w * h;
        let samples = match &self.samples {
            Samples::F16(v) => Samples::F16(bsq_to_bip(v, plane, n, bands_stored)),
            Samples::F32(v) => Samples::F32(bsq_to_bip(v, plane, n, bands_stored)),
        };
        Ok(HyperCube {
            width: w,
            height: h,
            bands_active: n,
            bands_stored,
            layout: Layout::PixelInterleaved,
            samples,
        })
    }
}

fn map_rows<T: Sample, F>(v: &mut [T], row: usize, stored: usize, width: usize, f: &F)
where
    F: Fn(usize, &mut [f32]) + Sync + Send,
{
    par::for_each_chunk_mut(v, row, |y, row| {
        let mut buf = vec![0.0f32; stored];
        for (x, px) in row.chunks_mut(stored).enumerate() {
            for (b, s) in buf.iter_mut().zip(px.iter()) {
                *b = s.to_f32();
            }
            f(y * width + x, &mut buf);
            for (s, b) in px.iter_mut().zip(&buf) {
                *s = T::from_f32(*b);
            }
        }
    });
}

fn bip_to_bsq<T: Sample>(v: &[T], plane: usize, bands: usize, stored: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; plane * bands];
    if plane == 0 {
        return out;
    }
    par::for_each_chunk_mut(&mut out, plane, |b, dst| {
        for (p, d) in dst.iter_mut().enumerate() {
            *d = v[p * stored + b];
        }
    });
    out
}

fn bsq_to_bip<T: Sample>(v: &[T], plane: usize, bands: usize, stored: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; plane * stored];
    if plane == 0 {
        return out;
    }
    par::for_each_chunk_mut(&mut out, stored, |p, dst| {
        for (b, d) in dst[..bands].iter_mut().enumerate() {
            *d = v[b * plane + p];
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, precision: Precision) -> HyperCube {
        HyperCube::from_fn(w, h, 25, 32, Layout::PixelInterleaved, precision, |x, y, b| {
            (x * 1000 + y * 100 + b) as f32 / 7.0
        })
        .unwrap()
    }

    #[test]
    fn single_pixel_unpads_to_25_bands() {
        let cube = ramp(1, 1, Precision::F32);
        let bsq = cube.to_band_sequential().unwrap();
        assert_eq!(bsq.bands_stored(), 25);
        assert_eq!(bsq.layout(), Layout::BandSequential);
        for b in 0..25 {
            assert_eq!(bsq.get(0, 0, b), cube.get(0, 0, b));
        }
    }

    #[test]
    fn band_planes_are_contiguous() {
        let cube = HyperCube::from_fn(2, 1, 25, 32, Layout::PixelInterleaved, Precision::F32, |x, _, b| {
            (x * 100 + b) as f32
        })
        .unwrap();
        let bsq = cube.to_band_sequential().unwrap();
        let s = bsq.samples_f32();
        for b in 0..25 {
            assert_eq!(&s[2 * b..2 * b + 2], &[b as f32, (100 + b) as f32]);
        }
    }

    #[test]
    fn relayout_round_trip_is_bit_exact() {
        for precision in [Precision::F16, Precision::F32] {
            let cube = ramp(7, 5, precision);
            let back = cube.to_band_sequential().unwrap().to_pixel_interleaved(32).unwrap();
            assert_eq!(back.sample_bits(), cube.sample_bits());
        }
    }

    #[test]
    fn wrong_layout_is_rejected() {
        let bsq = ramp(2, 2, Precision::F32).to_band_sequential().unwrap();
        assert!(matches!(bsq.to_band_sequential(), Err(Error::Layout { .. })));
        let bip = ramp(2, 2, Precision::F32);
        assert!(bip.to_pixel_interleaved(32).is_err());
    }

    #[test]
    fn read_pixel_agrees_across_layouts() {
        let cube = ramp(3, 4, Precision::F16);
        let bsq = cube.to_band_sequential().unwrap();
        let (mut a, mut b) = (vec![0.0; 25], vec![0.0; 25]);
        for i in 0..12 {
            cube.read_pixel(i, &mut a);
            bsq.read_pixel(i, &mut b);
            assert_eq!(a, b);
        }
    }
}
