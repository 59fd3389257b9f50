use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

impl PlyFormat {
    fn header_name(self) -> &'static str {
        match self {
            PlyFormat::Ascii => "ascii",
            PlyFormat::BinaryLittleEndian => "binary_little_endian",
        }
    }
}

/// Writes `x y z` as 32-bit floats and `red green blue alpha` as bytes, one vertex per
/// point. With `overlay`, points carrying a class color use it instead of RGB.
pub fn write_ply<W: Write>(cloud: &PointCloud, out: &mut W, format: PlyFormat, overlay: bool) -> std::io::Result<()> {
    write!(
        out,
        "ply\nformat {} 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar alpha\n\
         end_header\n",
        format.header_name(),
        cloud.len()
    )?;
    for p in &cloud.points {
        let [x, y, z] = p.position.map(|v| v as f32);
        let c = p.display_color(overlay);
        match format {
            PlyFormat::Ascii => writeln!(out, "{x} {y} {z} {} {} {} {}", c[0], c[1], c[2], c[3])?,
            PlyFormat::BinaryLittleEndian => {
                out.write_all(&x.to_le_bytes())?;
                out.write_all(&y.to_le_bytes())?;
                out.write_all(&z.to_le_bytes())?;
                out.write_all(&c)?;
            }
        }
    }
    Ok(())
}

pub fn write_ply_file(cloud: &PointCloud, path: &Path, format: PlyFormat, overlay: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_ply(cloud, &mut w, format, overlay)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
