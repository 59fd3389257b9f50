//! Pinhole camera math and multi-camera registration.
//!
//! A camera maps world points with `p_cam = R·p_world + t` followed by `K`. Depth
//! pixels back-project to `R⁻¹·(z·K⁻¹·(u, v, 1) − t)`, the exact inverse of projection.

mod camera;
mod cloud;
mod ply;

pub use camera::{CameraModel, CameraSet, Rig};
pub use cloud::{
    align_rgb_to_depth, align_rgb_to_depth_filled, backproject, project, register_frame, sample_bilinear, AlignedRgb,
    PixelDepth, Point, PointCloud, Projection, UNCOLORED,
};
pub use ply::{write_ply, write_ply_file, PlyFormat};
