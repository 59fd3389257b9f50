use std::hint::black_box;
use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use image::{ImageFormat, RgbImage};

use super::config::{PipelineConfig, Toggles};
use super::control::Control;
use super::handoff::Handoff;
use super::source::FrameSource;
use super::timing::{time_ms, time_stage, StageSample, StageTimings};
use crate::classify::{
    argmax_labels, colorize, kmeans_cluster, majority_vote, svm_predict, KMeansParams, LabelMap, SvmModel,
};
use crate::depthproc::{
    inpaint, radius_outlier_filter, statistical_outlier_filter, temporal_filter, DepthConfig, DepthFrame, FilterOrder,
};
use crate::error::{Error, Result};
use crate::geometry::{align_rgb_to_depth_filled, register_frame, write_ply_file, PlyFormat, PointCloud, Rig};
use crate::hypercube::{
    calibrate, demosaic, normalize, spectral_correct, CalibrationRefs, CorrectionMatrix, Precision,
};
use crate::par;
use crate::synthscene::FrameData;

/// Row name of the whole per-frame chain in timing reports.
pub const FRAME_STAGE: &str = "frame";

/// One processed frame. Immutable once emitted.
#[derive(Debug, Clone)]
pub struct FrameResult {
    /// Position in the emitted sequence.
    pub frame_index: u64,
    /// Index of the frame in its source.
    pub source_index: usize,
    pub toggles: Toggles,
    pub cloud: PointCloud,
    /// Fused class colors on the spectral grid.
    pub classification: RgbImage,
    pub labels: LabelMap,
    /// Depth after the enabled depth stages.
    pub depth: DepthFrame,
    /// One sample per executed stage plus the whole frame.
    pub timings: StageTimings,
}

impl FrameResult {
    pub fn classification_png(&self) -> Result<Vec<u8>> {
        let mut buf = Cursor::new(Vec::new());
        self.classification.write_to(&mut buf, ImageFormat::Png)?;
        Ok(buf.into_inner())
    }

    pub fn frame_ms(&self) -> f64 {
        self.timings.stat(FRAME_STAGE).map_or(0.0, |s| s.mean_ms)
    }
}

/// Everything a frame needs besides its own data.
#[derive(Debug, Clone)]
pub struct ChainContext {
    pub rig: Rig,
    pub calib: CalibrationRefs,
    pub correction: CorrectionMatrix,
    pub model: SvmModel,
    pub depth: DepthConfig,
    pub kmeans: KMeansParams,
    pub precision: Precision,
}

impl ChainContext {
    pub fn new(source: &FrameSource, cfg: &PipelineConfig) -> Result<Self> {
        let model = match &cfg.model {
            Some(p) => SvmModel::load(p)?,
            None => source.model()?,
        };
        Ok(ChainContext {
            rig: source.rig()?,
            calib: CalibrationRefs::new(&source.references()?)?,
            correction: source.correction()?,
            model,
            depth: cfg.depth.clone(),
            kmeans: cfg.kmeans.clone(),
            precision: cfg.precision,
        })
    }
}

type Samples = Vec<(&'static str, f64)>;

fn stage<R>(rec: &mut Samples, name: &'static str, f: impl FnOnce() -> R) -> R {
    let (r, ms) = time_ms(f);
    rec.push((name, ms));
    r
}

struct HsOutput {
    classification: RgbImage,
    labels: LabelMap,
}

fn hs_chain(ctx: &ChainContext, frame: &FrameData, rec: &mut Samples) -> Result<HsOutput> {
    let cube = stage(rec, "demosaic", || demosaic(&frame.mosaic))?;
    let cube = stage(rec, "calibrate", || calibrate(&cube, &ctx.calib, ctx.precision))?;
    let cube = stage(rec, "spectral_correct", || spectral_correct(&cube, &ctx.correction))?;
    let cube = stage(rec, "normalize", || normalize(&cube));
    let cube = stage(rec, "band_sequential", || cube.to_band_sequential())?;
    let probs = stage(rec, "svm_predict", || svm_predict(&cube, &ctx.model))?;
    let clusters = stage(rec, "kmeans", || kmeans_cluster(&cube, &ctx.kmeans))?;
    let fused = stage(rec, "majority_vote", || majority_vote(&probs, &clusters))?;
    let classification = stage(rec, "colorize", || colorize(&fused, &ctx.model.classes))?;
    Ok(HsOutput {
        classification,
        labels: argmax_labels(&fused),
    })
}

struct DepthOutput {
    refined: DepthFrame,
    /// Outlier-filtered depth, the temporal reference of the next frame.
    filtered: DepthFrame,
}

fn depth_chain(
    ctx: &ChainContext,
    frame: &FrameData,
    previous: Option<&DepthFrame>,
    toggles: &Toggles,
    rec: &mut Samples,
) -> Result<DepthOutput> {
    let cam = &ctx.rig.depth;
    let mut depth = frame.depth_noisy.clone();
    let order = match ctx.depth.order {
        FilterOrder::StatisticalFirst => [true, false],
        FilterOrder::RadiusFirst => [false, true],
    };
    for statistical in order {
        if statistical && toggles.statistical {
            depth = stage(rec, "statistical_filter", || {
                statistical_outlier_filter(&depth, cam, &ctx.depth)
            })?;
        } else if !statistical && toggles.radius {
            depth = stage(rec, "radius_filter", || radius_outlier_filter(&depth, cam, &ctx.depth))?;
        }
    }
    let filtered = depth.clone();
    if toggles.temporal {
        depth = stage(rec, "temporal_filter", || {
            temporal_filter(&depth, previous, ctx.depth.temporal_threshold_mm)
        })?;
    }
    if toggles.inpaint {
        let guide = stage(rec, "align_guide", || {
            align_rgb_to_depth_filled(&frame.rgb, &ctx.rig.rgb, &depth, cam)
        })?;
        depth = stage(rec, "inpaint", || inpaint(&depth, &guide.image, &ctx.depth.inpaint))?.depth;
    }
    Ok(DepthOutput {
        refined: depth,
        filtered,
    })
}

/// Runs one frame through both chains and registration.
///
/// Returns the result and the outlier-filtered depth to pass as `previous` for the
/// next frame. The spectral and depth chains are independent and run concurrently.
pub fn process_frame(
    ctx: &ChainContext,
    frame: &FrameData,
    previous: Option<&DepthFrame>,
    toggles: &Toggles,
    frame_index: u64,
) -> Result<(FrameResult, DepthFrame)> {
    let start = Instant::now();
    let ((hs, mut hs_rec), (depth, mut depth_rec)) = par::join(
        || {
            let mut rec = Samples::new();
            (hs_chain(ctx, frame, &mut rec), rec)
        },
        || {
            let mut rec = Samples::new();
            (depth_chain(ctx, frame, previous, toggles, &mut rec), rec)
        },
    );
    let (hs, depth) = (hs?, depth?);
    let mut rec = Samples::new();
    rec.append(&mut hs_rec);
    rec.append(&mut depth_rec);
    let overlay = toggles.overlay.then_some(&hs.classification);
    let cloud = stage(&mut rec, "register", || {
        register_frame(&depth.refined, &frame.rgb, overlay, &ctx.rig)
    })?;
    rec.push((FRAME_STAGE, start.elapsed().as_secs_f64() * 1e3));
    let samples = rec
        .into_iter()
        .map(|(stage, ms)| StageSample {
            stage: stage.to_string(),
            iteration: frame_index as usize,
            ms,
        })
        .collect();
    Ok((
        FrameResult {
            frame_index,
            source_index: frame.index,
            toggles: *toggles,
            cloud,
            classification: hs.classification,
            labels: hs.labels,
            depth: depth.refined,
            timings: StageTimings::from_samples(samples),
        },
        depth.filtered,
    ))
}

/// Totals of a finished run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub emitted: u64,
    pub skipped: u64,
}

/// Sequential frame producer over a source.
///
/// As an iterator it yields frames in source order, skipping frames that fail to
/// load or process (each failure is logged), and ends when the source is exhausted.
#[derive(Debug)]
pub struct Pipeline {
    config: PipelineConfig,
    source: FrameSource,
    ctx: ChainContext,
    control: Arc<Control>,
    next_source: usize,
    next_index: u64,
    previous: Option<DepthFrame>,
    skipped: u64,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let source = FrameSource::open(&config)?;
        let ctx = ChainContext::new(&source, &config)?;
        let control = Arc::new(Control::new(config.toggles));
        control.set_classes(ctx.model.classes.clone());
        Ok(Pipeline {
            config,
            source,
            ctx,
            control,
            next_source: 0,
            next_index: 0,
            previous: None,
            skipped: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }
    pub fn source(&self) -> &FrameSource {
        &self.source
    }
    pub fn context(&self) -> &ChainContext {
        &self.ctx
    }
    pub fn control(&self) -> Arc<Control> {
        self.control.clone()
    }
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    fn step(&mut self, index: usize) -> Result<FrameResult> {
        let frame = self.source.load(index)?;
        let toggles = self.control.toggles();
        let (result, filtered) = process_frame(&self.ctx, &frame, self.previous.as_ref(), &toggles, self.next_index)?;
        self.previous = Some(filtered);
        Ok(result)
    }

    /// Next emitted frame, or `None` once the source is exhausted.
    pub fn next_result(&mut self) -> Option<FrameResult> {
        let count = self.source.frame_count();
        loop {
            if self.next_source >= count {
                if !self.config.loop_frames || count == 0 || self.skipped >= self.next_index + count as u64 {
                    return None;
                }
                self.next_source = 0;
            }
            let index = self.next_source;
            self.next_source += 1;
            match self.step(index) {
                Ok(r) => {
                    self.next_index += 1;
                    self.control.record_frame(r.frame_index, &r.timings);
                    return Some(r);
                }
                Err(e) => {
                    log::error!("skipping frame {index}: {e}");
                    self.skipped += 1;
                    self.control.record_skip();
                    // a gap breaks the temporal reference
                    self.previous = None;
                }
            }
        }
    }

    /// Produces frames into every sink until the source ends, the control stops, or
    /// all sinks are closed. Closes the sinks on return.
    ///
    /// Replay sinks stall the producer until their consumer takes each frame.
    pub fn run(mut self, sinks: &[Arc<Handoff<Arc<FrameResult>>>]) -> RunSummary {
        let control = self.control();
        let interval = self.config.frame_interval();
        let mut open: Vec<bool> = vec![true; sinks.len()];
        let mut emitted = 0;
        while control.wait_running() {
            let start = Instant::now();
            let Some(result) = self.next_result() else { break };
            emitted += 1;
            let result = Arc::new(result);
            for (sink, open) in sinks.iter().zip(open.iter_mut()) {
                if *open && sink.publish(result.clone()).is_err() {
                    *open = false;
                }
            }
            if !sinks.is_empty() && !open.contains(&true) {
                break;
            }
            if let Some(rest) = interval.checked_sub(start.elapsed()) {
                control.sleep(rest);
            }
        }
        for sink in sinks {
            sink.close();
        }
        control.finish();
        RunSummary {
            emitted,
            skipped: self.skipped,
        }
    }

    /// Runs [`Pipeline::run`] on its own thread.
    pub fn spawn(self, sinks: Vec<Arc<Handoff<Arc<FrameResult>>>>) -> std::thread::JoinHandle<RunSummary> {
        std::thread::spawn(move || self.run(&sinks))
    }
}

impl Iterator for Pipeline {
    type Item = FrameResult;

    fn next(&mut self) -> Option<FrameResult> {
        self.next_result()
    }
}

/// Writes the cloud as PLY. With `overlay`, class colors replace RGB where present.
pub fn export_ply(result: &FrameResult, path: &Path, overlay: bool, format: PlyFormat) -> Result<()> {
    if result.cloud.is_empty() {
        return Err(Error::InvalidInput(format!(
            "frame {} has an empty cloud",
            result.frame_index
        )));
    }
    write_ply_file(&result.cloud, path, format, overlay)
}

/// File names of the per-frame artifacts written by [`write_frame_outputs`].
pub fn output_names(frame_index: u64) -> [String; 3] {
    [
        format!("cloud_{frame_index:06}.ply"),
        format!("classification_{frame_index:06}.png"),
        format!("depth_{frame_index:06}.png"),
    ]
}

/// Writes the cloud, classification map and refined depth of a frame into `dir`.
pub fn write_frame_outputs(result: &FrameResult, dir: &Path, format: PlyFormat) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let [ply, png, depth] = output_names(result.frame_index);
    if !result.cloud.is_empty() {
        export_ply(result, &dir.join(ply), result.toggles.overlay, format)?;
    }
    let png = dir.join(png);
    std::fs::write(&png, result.classification_png()?).map_err(|e| Error::io(&png, e))?;
    result.depth.write_png(&dir.join(depth))
}

/// Times every stage `config.timing.executions` times on a representative frame.
///
/// Each stage is timed on the input it receives in a normal run; the `frame` row
/// times the whole chain, so it bounds every single-stage row from above on average.
pub fn measure_stages(config: &PipelineConfig) -> Result<StageTimings> {
    config.validate()?;
    let source = FrameSource::open(config)?;
    let ctx = ChainContext::new(&source, config)?;
    let n = config.timing.executions;
    let index = usize::from(source.frame_count() > 1);
    let frame = source.load(index)?;
    let toggles = Toggles::all(true);
    let previous = if index > 0 {
        let prev = source.load(0)?;
        Some(process_frame(&ctx, &prev, None, &toggles, 0)?.1)
    } else {
        None
    };
    // warm caches and the thread pool
    process_frame(&ctx, &frame, previous.as_ref(), &toggles, 0)?;

    let mut t = StageTimings::default();
    let mut run = |name: &str, f: &mut dyn FnMut()| t.push_stage(name, &time_stage(n, f));

    let cube0 = demosaic(&frame.mosaic)?;
    run("demosaic", &mut || drop(black_box(demosaic(&frame.mosaic))));
    let cube1 = calibrate(&cube0, &ctx.calib, ctx.precision)?;
    run("calibrate", &mut || {
        drop(black_box(calibrate(&cube0, &ctx.calib, ctx.precision)))
    });
    let cube2 = spectral_correct(&cube1, &ctx.correction)?;
    run("spectral_correct", &mut || {
        drop(black_box(spectral_correct(&cube1, &ctx.correction)))
    });
    let cube3 = normalize(&cube2);
    run("normalize", &mut || drop(black_box(normalize(&cube2))));
    let cube = cube3.to_band_sequential()?;
    run("band_sequential", &mut || drop(black_box(cube3.to_band_sequential())));
    let probs = svm_predict(&cube, &ctx.model)?;
    run("svm_predict", &mut || drop(black_box(svm_predict(&cube, &ctx.model))));
    let clusters = kmeans_cluster(&cube, &ctx.kmeans)?;
    run("kmeans", &mut || drop(black_box(kmeans_cluster(&cube, &ctx.kmeans))));
    let fused = majority_vote(&probs, &clusters)?;
    run("majority_vote", &mut || {
        drop(black_box(majority_vote(&probs, &clusters)))
    });
    let classes = colorize(&fused, &ctx.model.classes)?;
    run("colorize", &mut || {
        drop(black_box(colorize(&fused, &ctx.model.classes)))
    });

    let cam = &ctx.rig.depth;
    let noisy = &frame.depth_noisy;
    let (first, second): (fn(_, _, _) -> _, fn(_, _, _) -> _) = match ctx.depth.order {
        FilterOrder::StatisticalFirst => (statistical_outlier_filter, radius_outlier_filter),
        FilterOrder::RadiusFirst => (radius_outlier_filter, statistical_outlier_filter),
    };
    let names = match ctx.depth.order {
        FilterOrder::StatisticalFirst => ["statistical_filter", "radius_filter"],
        FilterOrder::RadiusFirst => ["radius_filter", "statistical_filter"],
    };
    let d1 = first(noisy, cam, &ctx.depth)?;
    run(names[0], &mut || drop(black_box(first(noisy, cam, &ctx.depth))));
    let d2 = second(&d1, cam, &ctx.depth)?;
    run(names[1], &mut || drop(black_box(second(&d1, cam, &ctx.depth))));
    let thr = ctx.depth.temporal_threshold_mm;
    let d3 = temporal_filter(&d2, previous.as_ref(), thr)?;
    run("temporal_filter", &mut || {
        drop(black_box(temporal_filter(&d2, previous.as_ref(), thr)))
    });
    let guide = align_rgb_to_depth_filled(&frame.rgb, &ctx.rig.rgb, &d3, cam)?;
    run("align_guide", &mut || {
        drop(black_box(align_rgb_to_depth_filled(&frame.rgb, &ctx.rig.rgb, &d3, cam)))
    });
    let d4 = inpaint(&d3, &guide.image, &ctx.depth.inpaint)?.depth;
    run("inpaint", &mut || {
        drop(black_box(inpaint(&d3, &guide.image, &ctx.depth.inpaint)))
    });
    run("register", &mut || {
        drop(black_box(register_frame(&d4, &frame.rgb, Some(&classes), &ctx.rig)))
    });
    run(FRAME_STAGE, &mut || {
        drop(black_box(process_frame(&ctx, &frame, previous.as_ref(), &toggles, 0)))
    });
    Ok(t)
}
