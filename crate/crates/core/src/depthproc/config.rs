use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which outlier filter runs first when both are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOrder {
    #[default]
    StatisticalFirst,
    RadiusFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InpaintConfig {
    pub sigma_spatial_px: f64,
    /// Color distance scale in 8-bit levels (Euclidean over R, G, B).
    pub sigma_range_color: f64,
    pub max_passes: usize,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        InpaintConfig {
            sigma_spatial_px: 1.5,
            sigma_range_color: 12.0,
            max_passes: 200,
        }
    }
}

impl InpaintConfig {
    /// Half-width of the inpainting window: `ceil(2σ)`, at least 1.
    pub fn radius(&self) -> usize {
        ((2.0 * self.sigma_spatial_px).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthConfig {
    /// Edge of the square outlier-filter window, odd.
    pub window: usize,
    pub n_std: f64,
    pub radius_m: f64,
    pub temporal_threshold_mm: u32,
    pub inpaint: InpaintConfig,
    pub order: FilterOrder,
}

impl Default for DepthConfig {
    fn default() -> Self {
        DepthConfig {
            window: 7,
            n_std: 2.0,
            radius_m: 0.05,
            temporal_threshold_mm: 50,
            inpaint: InpaintConfig::default(),
            order: FilterOrder::default(),
        }
    }
}

impl DepthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.window < 3 || self.window % 2 == 0 {
            return bad("window must be odd and at least 3");
        }
        if !(self.n_std > 0.0 && self.n_std.is_finite()) {
            return bad("n_std must be positive");
        }
        if !(self.radius_m > 0.0) {
            return bad("radius_m must be positive");
        }
        if self.temporal_threshold_mm == 0 {
            return bad("temporal_threshold_mm must be positive");
        }
        let ip = &self.inpaint;
        if !(ip.sigma_spatial_px > 0.0 && ip.sigma_spatial_px.is_finite() && ip.sigma_range_color > 0.0) {
            return bad("inpaint sigmas must be positive");
        }
        if ip.max_passes == 0 {
            return bad("inpaint max_passes must be at least 1");
        }
        Ok(())
    }
}
