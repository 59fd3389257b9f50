//! Depth-frame refinement: outlier removal, temporal smoothing and RGB-guided hole filling.
//!
//! Every operation reads its input frame only and writes a new frame. Outlier filters
//! only ever clear samples; inpainting only ever sets them.

mod config;
mod filters;
mod frame;
mod inpaint;

pub use config::{DepthConfig, FilterOrder, InpaintConfig};
pub use filters::{radius_outlier_filter, remove_outliers, statistical_outlier_filter, temporal_filter};
pub use frame::{DepthFrame, MISSING, OPERATING_RANGE_MM};
pub use inpaint::{inpaint, InpaintResult};
