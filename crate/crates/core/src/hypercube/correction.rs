use std::path::Path;

use crate::error::{Error, Result};

/// Square spectral correction matrix applied as `v · M` to every pixel.
///
/// The active `k×k` block sits in the top-left corner; the remaining rows and
/// columns are identity so padded and unpadded products agree.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionMatrix {
    size: usize,
    active: usize,
    entries: Vec<f32>,
}

impl CorrectionMatrix {
    pub fn identity(size: usize, active: usize) -> Self {
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1.0;
        }
        CorrectionMatrix { size, active, entries }
    }

    /// Embeds a row-major `active×active` block into a `size×size` identity.
    pub fn from_active_block(size: usize, active: usize, block: &[f32]) -> Result<Self> {
        if active > size || block.len() != active * active {
            return Err(Error::InvalidInput(format!(
                "active block of {} entries does not fit {active}x{active} in {size}x{size}",
                block.len()
            )));
        }
        let mut m = Self::identity(size, active);
        for r in 0..active {
            m.entries[r * size..r * size + active].copy_from_slice(&block[r * active..(r + 1) * active]);
        }
        m.validate()?;
        Ok(m)
    }

    /// Full matrix; the padding rows/columns beyond `active` must be identity.
    pub fn new(size: usize, active: usize, entries: Vec<f32>) -> Result<Self> {
        if entries.len() != size * size || active > size {
            return Err(Error::InvalidInput(format!(
                "correction matrix needs {} entries, got {}",
                size * size,
                entries.len()
            )));
        }
        let m = CorrectionMatrix { size, active, entries };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("correction matrix has non-finite entries".into()));
        }
        for r in 0..self.size {
            for c in 0..self.size {
                if r < self.active && c < self.active {
                    continue;
                }
                let expected = if r == c { 1.0 } else { 0.0 };
                if self.get(r, c) != expected {
                    return Err(Error::InvalidInput(format!(
                        "correction padding entry ({r}, {c}) must be {expected}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }
    pub fn active(&self) -> usize {
        self.active
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.entries[row * self.size + col]
    }

    pub fn entries(&self) -> &[f32] {
        &self.entries
    }

    /// Reads `size` lines of `size` comma-separated decimals.
    pub fn read_csv(path: &Path, active: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => Error::MissingFile(path.to_path_buf()),
                _ => Error::Csv(e),
            })?;
        let mut entries = Vec::new();
        let mut rows = 0;
        for record in reader.records() {
            let record = record?;
            for field in record.iter() {
                entries.push(
                    field
                        .parse::<f32>()
                        .map_err(|e| Error::InvalidInput(format!("{}: bad value {field:?}: {e}", path.display())))?,
                );
            }
            rows += 1;
        }
        if rows * rows != entries.len() {
            return Err(Error::InvalidInput(format!(
                "{}: {rows} rows do not form a square matrix",
                path.display()
            )));
        }
        Self::new(rows, active, entries)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for row in self.entries.chunks(self.size) {
            writer.write_record(row.iter().map(|v| format!("{v}")))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_must_be_identity() {
        let mut entries = CorrectionMatrix::identity(32, 25).entries().to_vec();
        entries[30 * 32 + 2] = 0.5;
        assert!(CorrectionMatrix::new(32, 25, entries).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let mut block = vec![0.0; 4];
        block[3] = f32::NAN;
        assert!(CorrectionMatrix::from_active_block(4, 2, &block).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("correction.csv");
        let block: Vec<f32> = (0..625).map(|i| (i as f32 * 0.37).sin()).collect();
        let m = CorrectionMatrix::from_active_block(32, 25, &block).unwrap();
        m.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 32);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 32);
        assert_eq!(CorrectionMatrix::read_csv(&path, 25).unwrap(), m);
    }
}
