//! Depth-quality assessment by view synthesis.
//!
//! A center RGBD frame is forward-warped into every side camera of a 5×5 grid and the
//! result is compared with the captured side view by PSNR over the synthesized pixels
//! only. Running this for several depth sources ranks them by how well they support
//! novel views.

mod psnr;
mod report;
mod synth;

pub use psnr::{masked_psnr, PsnrMode, PSNR_CAP_DB};
pub use report::{
    center_rgbd, corrected_depth, modality_report, summarize, CenterRgbd, EvalConfig, Modality, ModalityReport,
    ModalitySummary, ViewScore,
};
pub use synth::{synthesize_view, SynthesisResult};
