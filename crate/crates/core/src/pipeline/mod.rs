//! Frame orchestration: sources, the per-frame chain, timing and the producer side
//! of the frame handoff.
//!
//! A [`Pipeline`] reads frames from a dataset directory or renders them in memory,
//! runs the spectral chain and the depth chain of each frame concurrently, joins
//! them in registration and publishes immutable [`FrameResult`]s through
//! [`Handoff`] slots, one per consumer.

mod config;
mod control;
mod handoff;
mod run;
mod source;
mod timing;

pub use config::{GeneratorConfig, PipelineConfig, TimingConfig, Toggles};
pub use control::{Command, Control, Status, TIMING_WINDOW};
pub use handoff::{Closed, Handoff, HandoffMode};
pub use run::{
    export_ply, measure_stages, output_names, process_frame, write_frame_outputs, ChainContext, FrameResult, Pipeline,
    RunSummary, FRAME_STAGE,
};
pub use source::FrameSource;
pub use timing::{time_ms, time_stage, StageSample, StageStat, StageTimings, DEFAULT_EXECUTIONS};
