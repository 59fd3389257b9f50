//! Binary point-cloud frames for streaming clients.
//!
//! Layout, little-endian throughout:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 4 | magic `SLPC` |
//! | 4 | 2 | version (u16) |
//! | 6 | 8 | frame index (u64) |
//! | 14 | 4 | point count (u32) |
//! | 18 | 4 | flags (u32), bit 0 = class overlay present |
//! | 22 | | points |
//!
//! Each point is `x, y, z` as f32 meters followed by `r, g, b, a` bytes, then
//! `cr, cg, cb, ca` bytes only when bit 0 is set: 20 bytes per point with the overlay,
//! 16 without.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, UNCOLORED};
use crate::pipeline::FrameResult;

pub const MAGIC: [u8; 4] = *b"SLPC";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 22;
pub const FLAG_CLASS_OVERLAY: u32 = 1;
pub const POINT_LEN: usize = 16;
pub const POINT_LEN_OVERLAY: usize = 20;

/// Hand-assembled reference messages: `valid` frames with their exact bytes and
/// `invalid` byte strings that must be rejected.
pub const TEST_VECTORS_JSON: &str = include_str!("../testdata/wire_vectors.json");

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WirePoint {
    pub position: [f32; 3],
    pub rgb: [u8; 4],
    /// All zero when the frame carries no overlay.
    pub class_rgb: [u8; 4],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WireFrame {
    pub frame_index: u64,
    /// Bits other than [`FLAG_CLASS_OVERLAY`] are carried through unchanged.
    pub flags: u32,
    pub points: Vec<WirePoint>,
}

impl WireFrame {
    /// Class colors are sent when `overlay` is on and some point has one; points
    /// without a class color then carry zero bytes.
    pub fn from_cloud(frame_index: u64, cloud: &PointCloud, overlay: bool) -> Self {
        let with_class = overlay && cloud.has_class_overlay();
        WireFrame {
            frame_index,
            flags: if with_class { FLAG_CLASS_OVERLAY } else { 0 },
            points: cloud
                .points
                .iter()
                .map(|p| WirePoint {
                    position: p.position.map(|v| v as f32),
                    rgb: p.rgb,
                    class_rgb: if with_class {
                        p.class_rgb.unwrap_or(UNCOLORED)
                    } else {
                        UNCOLORED
                    },
                })
                .collect(),
        }
    }

    pub fn has_overlay(&self) -> bool {
        self.flags & FLAG_CLASS_OVERLAY != 0
    }

    pub fn point_len(&self) -> usize {
        if self.has_overlay() {
            POINT_LEN_OVERLAY
        } else {
            POINT_LEN
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.points.len() * self.point_len()
    }

    /// Encodable without loss: no class bytes without the overlay flag, and a
    /// point count that fits the header.
    pub fn is_valid(&self) -> bool {
        u32::try_from(self.points.len()).is_ok()
            && (self.has_overlay() || self.points.iter().all(|p| p.class_rgb == UNCOLORED))
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if !self.is_valid() {
            return Err(Error::Wire("class colors present without the overlay flag".into()));
        }
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.frame_index.to_le_bytes());
        out.extend_from_slice(&(self.points.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
        let overlay = self.has_overlay();
        for p in &self.points {
            for v in p.position {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&p.rgb);
            if overlay {
                out.extend_from_slice(&p.class_rgb);
            }
        }
        Ok(out)
    }

    /// Parses a complete message. Nothing is returned for truncated or padded input.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Wire(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::Wire("bad magic".into()));
        }
        let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().expect("2 bytes"));
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let version = u16_at(4);
        if version != VERSION {
            return Err(Error::Wire(format!("unsupported version {version}")));
        }
        let frame_index = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
        let count = u32_at(14) as usize;
        let flags = u32_at(18);
        let overlay = flags & FLAG_CLASS_OVERLAY != 0;
        let stride = if overlay { POINT_LEN_OVERLAY } else { POINT_LEN };
        let payload = &bytes[HEADER_LEN..];
        if count.checked_mul(stride) != Some(payload.len()) {
            return Err(Error::Wire(format!(
                "payload of {} bytes does not hold {count} points of {stride} bytes",
                payload.len()
            )));
        }
        let points = payload
            .chunks_exact(stride)
            .map(|c| {
                let f = |o: usize| f32::from_le_bytes(c[o..o + 4].try_into().expect("4 bytes"));
                WirePoint {
                    position: [f(0), f(4), f(8)],
                    rgb: c[12..16].try_into().expect("4 bytes"),
                    class_rgb: if overlay {
                        c[16..20].try_into().expect("4 bytes")
                    } else {
                        UNCOLORED
                    },
                }
            })
            .collect();
        Ok(WireFrame {
            frame_index,
            flags,
            points,
        })
    }
}

/// Wire bytes of a processed frame, with class colors when its overlay was on.
pub fn encode_wireframe(result: &FrameResult) -> Vec<u8> {
    WireFrame::from_cloud(result.frame_index, &result.cloud, result.toggles.overlay)
        .encode()
        .expect("frames built from clouds are valid")
}

pub fn decode_wireframe(bytes: &[u8]) -> Result<WireFrame> {
    WireFrame::decode(bytes)
}
