use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use hsar_core::pipeline::{
    measure_stages, write_frame_outputs, FrameResult, Handoff, HandoffMode, Pipeline, PipelineConfig,
};
use hsar_core::syntheval::{modality_report, EvalConfig, Modality, PsnrMode};
use hsar_core::synthscene::{generate_dataset, Dataset, SceneSpec};
use hsar_core::Error;
use hsar_server::{ServerHandle, ServerOptions};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hsar",
    version,
    about = "Hyperspectral and depth processing chain with point-cloud streaming"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Process a dataset frame by frame.
    Run(RunArgs),
    /// Write a synthetic dataset.
    Generate(GenerateArgs),
    /// Score synthesized grid views for each depth modality.
    Evaluate(EvaluateArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Dataset directory; overrides the config file's source.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stream frames over HTTP/WebSocket on this address.
    #[arg(long)]
    serve: Option<SocketAddr>,
    /// Viewer files served under `/`.
    #[arg(long, requires = "serve")]
    assets: Option<PathBuf>,
    /// Write each frame's cloud, classification map and depth here.
    #[arg(long)]
    export_ply: Option<PathBuf>,
    /// Write a per-stage timing report (and `<name>.samples.csv` with raw samples).
    #[arg(long)]
    timings: Option<PathBuf>,
    /// Stages to disable: statistical, radius, temporal, inpaint, overlay.
    #[arg(long, value_delimiter = ',')]
    toggle_off: Vec<String>,
    /// Minimum delay between frames in milliseconds.
    #[arg(long)]
    pace_ms: Option<u64>,
}

#[derive(clap::Args)]
struct GenerateArgs {
    /// Scene description; the built-in demo scene when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Integer downscale of every camera.
    #[arg(long, default_value_t = 1)]
    downscale: usize,
    /// Include the 5x5 camera grid used by `evaluate`.
    #[arg(long)]
    grid: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PsnrArg {
    Plain,
    ShiftTolerant,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Per-view scores; the summary goes next to it as `<name>_summary.csv`.
    #[arg(long)]
    out: PathBuf,
    /// Frame to evaluate; the last one when absent.
    #[arg(long)]
    frame: Option<usize>,
    #[arg(long, default_value_t = 1)]
    splat_radius: usize,
    #[arg(long, value_enum, default_value_t = PsnrArg::Plain)]
    psnr: PsnrArg,
    /// Comma-separated subset of ground_truth, raw, corrected.
    #[arg(long, value_delimiter = ',')]
    modalities: Vec<String>,
}

/// An error with the exit code it maps to.
struct Failure(u8, String);

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_CONFIG, e.to_string())
}

fn data_err(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_DATA, e.to_string())
}

fn classify(e: Error) -> Failure {
    if e.is_data_error() {
        data_err(e)
    } else {
        config_err(e)
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p).map_err(config_err)?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = args.dataset {
        cfg.dataset = Some(d);
        cfg.generator = None;
    }
    if args.pace_ms.is_some() {
        cfg.pace_ms = args.pace_ms;
    }
    for stage in &args.toggle_off {
        cfg.toggles.set(stage.trim(), false).map_err(config_err)?;
    }
    cfg.validate().map_err(config_err)?;

    if let Some(path) = &args.timings {
        let report = measure_stages(&cfg).map_err(classify)?;
        report.write_csv(path).map_err(data_err)?;
        report
            .write_samples_csv(&sibling(path, ".samples.csv"))
            .map_err(data_err)?;
        print!("{}", report.table());
    }

    let pipeline = Pipeline::new(cfg.clone()).map_err(classify)?;
    let control = pipeline.control();
    let mut sinks: Vec<Arc<Handoff<Arc<FrameResult>>>> = Vec::new();
    let exporter = args.export_ply.map(|dir| {
        let h = Arc::new(Handoff::new(HandoffMode::Replay));
        sinks.push(h.clone());
        let format = cfg.ply_format;
        std::thread::spawn(move || -> Result<u64, Failure> {
            let mut written = 0;
            while let Some(r) = h.take() {
                if let Err(e) = write_frame_outputs(&r, &dir, format) {
                    h.close();
                    return Err(data_err(e));
                }
                written += 1;
            }
            Ok(written)
        })
    });
    let server = match args.serve {
        Some(addr) => {
            let h = Arc::new(Handoff::new(HandoffMode::Live));
            sinks.push(h.clone());
            let opts = ServerOptions {
                addr,
                assets: args.assets,
            };
            let server = ServerHandle::start(opts, h, control.clone()).map_err(config_err)?;
            println!("serving on http://{}", server.local_addr());
            Some(server)
        }
        None => None,
    };
    if sinks.is_empty() {
        // nothing consumes frames; count them instead
        let h = Arc::new(Handoff::new(HandoffMode::Replay));
        sinks.push(h.clone());
        std::thread::spawn(move || while h.take().is_some() {});
    }

    let summary = pipeline.run(&sinks);
    log::info!("{} frames emitted, {} skipped", summary.emitted, summary.skipped);
    if let Some(t) = exporter {
        t.join().expect("exporter thread")?;
    }
    if let Some(s) = server {
        println!("source finished; still serving the last frame (Ctrl-C to stop)");
        s.wait();
    }
    println!("{} frames, {} skipped", summary.emitted, summary.skipped);
    if summary.emitted == 0 && summary.skipped > 0 {
        return Err(data_err("no frame could be processed"));
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let mut spec = match &args.spec {
        Some(p) => SceneSpec::load(p).map_err(config_err)?,
        None => SceneSpec::demo(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if args.grid {
        spec.grid = true;
    }
    if args.downscale == 0 {
        return Err(config_err("--downscale must be positive"));
    }
    if args.downscale > 1 {
        spec = spec.downscaled(args.downscale);
    }
    spec.validate().map_err(config_err)?;
    let manifest = generate_dataset(&spec, args.frames, &args.out).map_err(classify)?;
    println!("wrote {} frames to {}", manifest.frames, args.out.display());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let modalities = if args.modalities.is_empty() {
        Modality::ALL.to_vec()
    } else {
        args.modalities
            .iter()
            .map(|m| Modality::parse(m.trim()).ok_or_else(|| config_err(format!("unknown modality {m:?}"))))
            .collect::<Result<_, _>>()?
    };
    let ds = Dataset::open(&args.dataset).map_err(config_err)?;
    let cfg = EvalConfig {
        splat_radius_px: args.splat_radius,
        psnr_mode: match args.psnr {
            PsnrArg::Plain => PsnrMode::Plain,
            PsnrArg::ShiftTolerant => PsnrMode::ShiftTolerant,
        },
        frame: args.frame,
        ..Default::default()
    };
    let report = modality_report(&ds, &modalities, &cfg).map_err(classify)?;
    report.write_csv(&args.out).map_err(data_err)?;
    report
        .write_summary_csv(&sibling(&args.out, "_summary.csv"))
        .map_err(data_err)?;
    println!(
        "{:<14} {:>9} {:>8} {:>9} {:>9}",
        "modality", "mean dB", "std", "min", "max"
    );
    for s in &report.summaries {
        println!(
            "{:<14} {:>9.3} {:>8.3} {:>9.3} {:>9.3}",
            s.modality.name(),
            s.mean,
            s.std,
            s.min,
            s.max
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run(a) => run(a),
        Cmd::Generate(a) => generate(a),
        Cmd::Evaluate(a) => evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hsar_core::pipeline::Toggles;

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let c = Cli::try_parse_from(["hsar", "run", "--dataset", "d", "--toggle-off", "inpaint,temporal"]).unwrap();
        let Cmd::Run(a) = c.command else { panic!() };
        assert_eq!(a.toggle_off, ["inpaint", "temporal"]);
        assert!(Toggles::NAMES.contains(&a.toggle_off[0].as_str()));
    }

    #[test]
    fn sibling_names() {
        assert_eq!(
            sibling(Path::new("out/t.csv"), ".samples.csv"),
            Path::new("out/t.samples.csv")
        );
    }
}
