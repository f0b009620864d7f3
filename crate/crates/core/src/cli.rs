//! The `cvkit` command line. [`run`] parses arguments and returns the
//! process exit code: 0 on success, 1 on a usage error, 2 when the
//! operation fails.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::frame_io::{
    benchmark_throughput, BackendRegistry, BenchmarkOptions, LoadMode, BUFFERED_SUFFIX, DEFAULT_BUFFER_CAPACITY,
    IMAGE_DIR_BACKEND,
};
use crate::geometry::{export_easywand_package, load_dlt_coefficients, select_calibration_frames};
use crate::metrics::{mpjpe, pck};
use crate::pipeline::{
    apply_processor, load_views, reconstruct_views, run_pipeline, scan_registry, validate_pipeline, PipelineConfig,
    Registry, StageData, View,
};
use crate::pose::{read_pose_file, translate_pose_file, write_pose_file, PoseFormat};
use crate::service::AnnotationStore;

type CliResult = Result<(), Box<dyn std::error::Error + Send + Sync>>;

#[derive(Parser, Debug)]
#[command(
    name = "cvkit",
    version,
    about = "Pose tracking, 3D reconstruction and behavior analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Translate a pose file between formats
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "cvkit")]
        from: PoseFormat,
        #[arg(long, default_value = "cvkit")]
        to: PoseFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export an EasyWand package from an annotation store
    CalibrateExport {
        /// Annotation store CSV (camera,frame,part,x,y,provenance,residual)
        #[arg(long)]
        annotations: PathBuf,
        /// Camera order; defaults to the sorted camera names in the store
        #[arg(long, value_delimiter = ',')]
        cameras: Option<Vec<String>>,
        /// Number of frames to pick by farthest-point sampling
        #[arg(long, conflicts_with = "frames")]
        k: Option<usize>,
        /// Explicit frame indices
        #[arg(long, value_delimiter = ',')]
        frames: Option<Vec<u64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct 3D poses from per-camera 2D pose files
    Triangulate {
        /// A 2D pose file or a directory of per-camera `*.csv` files
        #[arg(long)]
        views: PathBuf,
        #[arg(long, default_value = "cvkit")]
        views_format: PoseFormat,
        /// DLT coefficient file, 11 rows by one column per camera
        #[arg(long)]
        dlt: PathBuf,
        /// View name for each DLT column; view order by default
        #[arg(long, value_delimiter = ',')]
        cameras: Option<Vec<String>>,
        #[arg(long, default_value = "cvkit")]
        format: PoseFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply one filter processor to a pose file
    Filter(ProcessorArgs),
    /// Compute a pose metric against ground truth
    Metric {
        #[command(subcommand)]
        metric: MetricCommand,
    },
    /// Run one behavior-analysis processor on a 3D pose file
    Analyze(ProcessorArgs),
    /// Run or validate a pipeline configuration
    Pipeline {
        #[command(subcommand)]
        action: PipelineCommand,
    },
    /// Measure buffered and unbuffered frame throughput
    BenchIo {
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value_t = 1000)]
        frames: u64,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// idle, loaded, or both
        #[arg(long, default_value = "both")]
        mode: String,
        #[arg(long, default_value_t = DEFAULT_BUFFER_CAPACITY)]
        buffer_capacity: usize,
        #[arg(long, default_value = IMAGE_DIR_BACKEND)]
        backend: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a project directory to the annotation UI on localhost
    Serve {
        #[arg(long)]
        project: PathBuf,
        #[arg(long, default_value_t = 8765)]
        port: u16,
    },
}

#[derive(Args, Debug)]
struct ProcessorArgs {
    /// Processor id, e.g. `kalman` or `occupancy_map`
    op: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "cvkit")]
    format: PoseFormat,
    /// Processor parameter, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_key_value)]
    params: Vec<(String, String)>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum MetricCommand {
    /// Mean per-joint position error
    Mpjpe(MetricArgs),
    /// Percentage of correct keypoints at x percent of a reference length
    Pck {
        #[command(flatten)]
        common: MetricArgs,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        ref_a: String,
        #[arg(long)]
        ref_b: String,
    },
}

#[derive(Args, Debug)]
struct MetricArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value = "cvkit")]
    format: PoseFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum PipelineCommand {
    /// Run the pipeline and print the run report
    Run {
        config: PathBuf,
        /// Stage artifact directory; `<config stem>.run` beside the config by default
        #[arg(long)]
        workspace: Option<PathBuf>,
        /// Directories of external `*.processor` manifests
        #[arg(long)]
        processors: Vec<PathBuf>,
    },
    /// Check the pipeline and print OK or the diagnostics
    Validate {
        config: PathBuf,
        #[arg(long)]
        processors: Vec<PathBuf>,
    },
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", describe(e.as_ref()));
            2
        }
    }
}

/// `Variant: message` for this crate's error enums, else the message.
fn describe(e: &(dyn std::error::Error + 'static)) -> String {
    macro_rules! named {
        ($($t:ty),*) => {
            $(if let Some(inner) = e.downcast_ref::<$t>() {
                let debug = format!("{inner:?}");
                let name: String = debug.chars().take_while(|c| c.is_ascii_alphanumeric()).collect();
                return format!("{name}: {e}");
            })*
        };
    }
    named!(
        crate::metrics::MetricError,
        crate::pipeline::PipelineError,
        crate::geometry::GeometryError,
        crate::pose::PoseError,
        crate::filters::FilterError,
        crate::frame_io::FrameError,
        crate::behavior::BehaviorError,
        crate::service::ServiceError
    );
    e.to_string()
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Convert { input, from, to, out } => {
            translate_pose_file(&input, from, &out, to)?;
        }
        Command::CalibrateExport {
            annotations,
            cameras,
            k,
            frames,
            out,
        } => {
            let store = AnnotationStore::read_csv(std::fs::File::open(&annotations)?)?;
            let cameras = cameras.unwrap_or_else(|| {
                let mut c: Vec<String> = store.iter().map(|a| a.camera.clone()).collect();
                c.dedup();
                c
            });
            let ann = store.camera_annotations(&cameras);
            let frames = match (frames, k) {
                (Some(f), _) => f,
                (None, Some(k)) => select_calibration_frames(&ann, k)?,
                (None, None) => return Err("give --k or --frames".into()),
            };
            let exported = export_easywand_package(&ann, &frames, &out)?;
            let list: Vec<String> = exported.iter().map(u64::to_string).collect();
            println!("{}", list.join(","));
        }
        Command::Triangulate {
            views,
            views_format,
            dlt,
            cameras,
            format,
            out,
        } => {
            let views = load_views(&views, views_format)?;
            let cams = load_dlt_coefficients(&dlt)?;
            let seq = reconstruct_views(&views, &cams, cameras)?;
            write_pose_file(&seq, &out, format)?;
        }
        Command::Filter(args) => filter(args)?,
        Command::Metric { metric } => {
            let (report, out) = match metric {
                MetricCommand::Mpjpe(a) => {
                    let (pred, gt) = (read_pose_file(&a.pred, a.format)?, read_pose_file(&a.gt, a.format)?);
                    (mpjpe(&pred, &gt)?, a.out)
                }
                MetricCommand::Pck {
                    common: a,
                    x,
                    ref_a,
                    ref_b,
                } => {
                    let (pred, gt) = (read_pose_file(&a.pred, a.format)?, read_pose_file(&a.gt, a.format)?);
                    (pck(&pred, &gt, x, &ref_a, &ref_b)?, a.out)
                }
            };
            emit(out.as_deref(), report.to_csv_string().as_bytes())?;
        }
        Command::Analyze(args) => analyze(args)?,
        Command::Pipeline { action } => match action {
            PipelineCommand::Run {
                config,
                workspace,
                processors,
            } => {
                let cfg = PipelineConfig::load(&config)?;
                let registry = scan_registry(&processors)?;
                let ws = workspace.unwrap_or_else(|| default_workspace(&config));
                let report = run_pipeline(&cfg, &registry, &ws)?;
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            PipelineCommand::Validate { config, processors } => {
                let cfg = PipelineConfig::load(&config)?;
                let registry = scan_registry(&processors)?;
                let diagnostics = validate_pipeline(&cfg, &registry);
                if !diagnostics.is_empty() {
                    for d in &diagnostics {
                        eprintln!("{d}");
                    }
                    return Err(crate::pipeline::PipelineError::Invalid(diagnostics).into());
                }
                println!("OK");
            }
        },
        Command::BenchIo {
            source,
            frames,
            runs,
            mode,
            buffer_capacity,
            backend,
            out,
        } => {
            let modes = match mode.as_str() {
                "both" => vec![LoadMode::Idle, LoadMode::Loaded],
                m => vec![m.parse::<LoadMode>()?],
            };
            let readers = [backend.clone(), format!("{backend}{BUFFERED_SUFFIX}")];
            let registry = BackendRegistry::default();
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["run", "backend", "load_mode", "fps", "frames"])?;
            for load_mode in modes {
                let opts = BenchmarkOptions {
                    n_frames: frames,
                    load_mode,
                    buffer_capacity,
                };
                for run in 0..runs {
                    let report = benchmark_throughput(&registry, &source, &readers, &opts)?;
                    if let Some((name, e)) = report.failures.into_iter().next() {
                        return Err(format!("{name}: {e}").into());
                    }
                    for r in report.rows {
                        w.write_record([
                            run.to_string(),
                            r.reader,
                            r.load_mode.to_string(),
                            r.fps.to_string(),
                            r.frames.to_string(),
                        ])?;
                    }
                }
            }
            emit(out.as_deref(), &w.into_inner().map_err(|e| e.to_string())?)?;
        }
        Command::Serve { project, port } => {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(crate::service::serve(project, port))?;
        }
    }
    Ok(())
}

fn default_workspace(config: &Path) -> PathBuf {
    let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("pipeline");
    config.with_file_name(format!("{stem}.run"))
}

fn params_map(params: Vec<(String, String)>) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (k, v) in params {
        if map.insert(k.clone(), v).is_some() {
            return Err(format!("parameter `{k}` given twice"));
        }
    }
    Ok(map)
}

/// 3D files go through the processor directly; 2D files through its `_2d`
/// variant as a single view.
fn filter(args: ProcessorArgs) -> CliResult {
    let registry = Registry::builtin();
    let m = registry
        .get(&args.op)
        .ok_or_else(|| format!("unknown processor `{}`", args.op))?;
    if m.category != crate::pipeline::Category::Filter || args.op.ends_with("_2d") {
        return Err(format!("`{}` is not a pose filter", args.op).into());
    }
    let seq = read_pose_file(&args.input, args.format)?;
    let params = params_map(args.params)?;
    let out = if seq.dims() == 3 {
        apply_processor(&registry, &args.op, params, StageData::Pose3d(seq), None)?
    } else {
        let view = View {
            camera: "input".into(),
            seq,
        };
        apply_processor(
            &registry,
            &format!("{}_2d", args.op),
            params,
            StageData::Pose2d(vec![view]),
            None,
        )?
    };
    let seq = match out {
        StageData::Pose3d(s) => s,
        StageData::Pose2d(mut v) => v.remove(0).seq,
        other => return Err(format!("filter produced {}", other.kind()).into()),
    };
    write_pose_file(&seq, &args.out, args.format)?;
    Ok(())
}

const ANALYSES: [&str; 5] = [
    "occupancy_map",
    "gaze_heatmap",
    "rearing",
    "ebc_rate_map",
    "spike_locations",
];

/// Writes the table to `--out`; side outputs go beside it with the
/// extension replaced by their suffix.
fn analyze(args: ProcessorArgs) -> CliResult {
    if !ANALYSES.contains(&args.op.as_str()) {
        return Err(format!("`{}` is not one of {}", args.op, ANALYSES.join(", ")).into());
    }
    let seq = read_pose_file(&args.input, args.format)?;
    let registry = Registry::builtin();
    let StageData::Table(t) = apply_processor(
        &registry,
        &args.op,
        params_map(args.params)?,
        StageData::Pose3d(seq),
        None,
    )?
    else {
        return Err("analysis produced no table".into());
    };
    std::fs::write(&args.out, &t.text)?;
    for (suffix, bytes) in &t.extras {
        std::fs::write(args.out.with_extension(suffix), bytes)?;
    }
    Ok(())
}
