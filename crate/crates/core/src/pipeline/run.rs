use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{Point2, Point3};
use serde::Serialize;

use super::config::{check_params, validate_pipeline, Diagnostic, PipelineConfig, StageConfig};
use super::manifest::{DataKind, Exec, ProcessorManifest, Registry};
use super::stats::{input_statistics, InputStatistics};
use super::syntax::{split_command, substitute};
use super::PipelineError;
use crate::behavior::{self, Arena, EbcParams, SpikeTrain};
use crate::filters::{self, KalmanParams};
use crate::frame_io::{self, BackendRegistry};
use crate::geometry::{self, dlt_project, dlt_reconstruct, load_dlt_coefficients, CameraProfile, Observation};
use crate::pose::{read_pose_file, write_pose_file, Part, PoseFormat, PoseSequence, Skeleton};

/// Name of the JSON run report written into the workspace.
pub const REPORT_FILE: &str = "run_report.json";

/// Error type of the view helpers.
pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

/// One camera's 2D pose sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub camera: String,
    pub seq: PoseSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameSource {
    pub path: PathBuf,
    pub backend: String,
    pub buffer_capacity: usize,
    pub frame_count: Option<u64>,
    pub width: u32,
    pub height: u32,
}

/// CSV text plus optional side files keyed by file suffix.
#[derive(Debug, Clone, PartialEq)]
pub struct TableData {
    pub text: String,
    pub extras: Vec<(String, Vec<u8>)>,
}

impl TableData {
    fn csv(text: String) -> Self {
        Self {
            text,
            extras: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.text.lines().count().saturating_sub(1)
    }
}

/// Data flowing between stages.
#[derive(Debug, Clone, PartialEq)]
pub enum StageData {
    None,
    Pose2d(Vec<View>),
    Pose3d(PoseSequence),
    Frames(FrameSource),
    Table(TableData),
}

impl StageData {
    pub fn kind(&self) -> DataKind {
        match self {
            StageData::None => DataKind::None,
            StageData::Pose2d(_) => DataKind::Pose2d,
            StageData::Pose3d(_) => DataKind::Pose3d,
            StageData::Frames(_) => DataKind::Frames,
            StageData::Table(_) => DataKind::Table,
        }
    }

    /// Frames, rows or items carried.
    pub fn items(&self) -> usize {
        match self {
            StageData::None => 0,
            StageData::Pose2d(v) => v.iter().map(|v| v.seq.len()).sum(),
            StageData::Pose3d(s) => s.len(),
            StageData::Frames(f) => f.frame_count.unwrap_or(0) as usize,
            StageData::Table(t) => t.rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub index: usize,
    pub id: String,
    pub wall_time_s: f64,
    /// Items in the stage's input.
    pub items_in: usize,
    /// Items in the stage's output.
    pub items_out: usize,
    /// Statistics of pose input, one entry per view (`*` for 3D).
    pub input_statistics: Vec<(String, InputStatistics)>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub pipeline: String,
    pub workspace: PathBuf,
    pub stages: Vec<StageReport>,
}

/// `stage_<i>_<id>.csv`
pub fn stage_artifact_name(index: usize, id: &str) -> String {
    format!("stage_{index}_{id}.csv")
}

/// Runs the pipeline and writes [`REPORT_FILE`] into `workspace`.
pub fn run_pipeline(cfg: &PipelineConfig, registry: &Registry, workspace: &Path) -> Result<RunReport, PipelineError> {
    let (report, _) = execute_pipeline(cfg, registry, workspace)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(workspace.join(REPORT_FILE), json)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", workspace.display())))?;
    Ok(report)
}

/// Runs the stages in order, persisting each stage's output in
/// `workspace`, and returns the report and the final stage output.
pub fn execute_pipeline(
    cfg: &PipelineConfig,
    registry: &Registry,
    workspace: &Path,
) -> Result<(RunReport, StageData), PipelineError> {
    let diagnostics = validate_pipeline(cfg, registry);
    if !diagnostics.is_empty() {
        return Err(PipelineError::Invalid(diagnostics));
    }
    std::fs::create_dir_all(workspace).map_err(|e| PipelineError::Io(format!("{}: {e}", workspace.display())))?;
    let mut report = RunReport {
        pipeline: cfg.name.clone(),
        workspace: workspace.to_path_buf(),
        stages: Vec::new(),
    };
    let mut data = StageData::None;
    for (i, stage) in cfg.stages.iter().enumerate() {
        let m = registry.get(&stage.id).expect("validated");
        let params = Params {
            values: cfg.bound_params(i, m),
            cfg,
        };
        let stats = pose_statistics(&data);
        let items_in = data.items();
        let start = Instant::now();
        let fail = |message: String, report: &RunReport| PipelineError::StageFailure {
            stage: i,
            id: stage.id.clone(),
            message,
            report: Box::new(report.clone()),
        };
        let outcome = match &m.exec {
            Exec::Builtin(op) => run_builtin(op, data, &params).map_err(|e| fail(e.to_string(), &report)),
            Exec::External(template) => run_external(template, m, data, &params, workspace, i).map_err(|e| match e {
                ExternalError::Exit { code, stderr } => PipelineError::ExternalProcessError {
                    stage: i,
                    id: stage.id.clone(),
                    code,
                    stderr,
                    report: Box::new(report.clone()),
                },
                ExternalError::Other(e) => fail(e.to_string(), &report),
            }),
        };
        let (out, mut artifacts) = outcome?;
        let written = write_artifacts(workspace, i, &stage.id, &out).map_err(|e| fail(e.to_string(), &report))?;
        artifacts.extend(written);
        report.stages.push(StageReport {
            index: i,
            id: stage.id.clone(),
            wall_time_s: start.elapsed().as_secs_f64(),
            items_in,
            items_out: out.items(),
            input_statistics: stats,
            artifacts,
        });
        data = out;
    }
    Ok((report, data))
}

/// Applies one builtin processor outside a pipeline. Parameters are bound
/// and checked as for a pipeline stage; relative paths resolve against
/// `base_dir`.
pub fn apply_processor(
    registry: &Registry,
    id: &str,
    params: BTreeMap<String, String>,
    input: StageData,
    base_dir: Option<&Path>,
) -> Result<StageData, PipelineError> {
    let m = registry
        .get(id)
        .ok_or_else(|| PipelineError::UnknownProcessor(id.to_string()))?;
    if input.kind() != m.input_kind {
        return Err(PipelineError::KindMismatch {
            index: 0,
            reason: format!("`{id}` takes {} but was given {}", m.input_kind, input.kind()),
        });
    }
    let Exec::Builtin(op) = &m.exec else {
        return Err(PipelineError::Invalid(vec![Diagnostic {
            stage: Some(0),
            reason: format!("`{id}` is external; run it inside a pipeline"),
        }]));
    };
    let mut cfg = PipelineConfig::new(
        id,
        vec![StageConfig {
            id: id.to_string(),
            params,
        }],
    );
    cfg.base_dir = base_dir.map(Path::to_path_buf);
    let values = cfg.bound_params(0, m);
    let problems: Vec<Diagnostic> = check_params(m, &cfg.stages[0].params, &values)
        .into_iter()
        .map(|reason| Diagnostic { stage: Some(0), reason })
        .collect();
    if !problems.is_empty() {
        return Err(PipelineError::Invalid(problems));
    }
    let p = Params { values, cfg: &cfg };
    run_builtin(op, input, &p)
        .map(|(out, _)| out)
        .map_err(|e| PipelineError::StageFailure {
            stage: 0,
            id: id.to_string(),
            message: e.to_string(),
            report: Box::new(RunReport {
                pipeline: id.to_string(),
                workspace: PathBuf::new(),
                stages: Vec::new(),
            }),
        })
}

fn pose_statistics(data: &StageData) -> Vec<(String, InputStatistics)> {
    match data {
        StageData::Pose3d(seq) => input_statistics(seq)
            .map(|s| vec![("*".to_string(), s)])
            .unwrap_or_default(),
        StageData::Pose2d(views) => views
            .iter()
            .filter_map(|v| input_statistics(&v.seq).ok().map(|s| (v.camera.clone(), s)))
            .collect(),
        _ => Vec::new(),
    }
}

struct Params<'a> {
    values: BTreeMap<String, String>,
    cfg: &'a PipelineConfig,
}

impl Params<'_> {
    fn text(&self, key: &str) -> Result<&str, BoxError> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| format!("parameter `{key}` is not bound").into())
    }

    fn opt_text(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn real(&self, key: &str) -> Result<f64, BoxError> {
        Ok(self.text(key)?.parse()?)
    }

    fn usize(&self, key: &str) -> Result<usize, BoxError> {
        Ok(self.text(key)?.parse()?)
    }

    fn path(&self, key: &str) -> Result<PathBuf, BoxError> {
        Ok(self.cfg.resolve(self.text(key)?))
    }

    fn format(&self) -> Result<PoseFormat, BoxError> {
        Ok(self.text("format")?.parse()?)
    }

    fn arena(&self) -> Result<Arena, BoxError> {
        let v: Vec<f64> = self
            .text("arena")?
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()?;
        match v[..] {
            [x0, y0, x1, y1] => Ok(Arena::new([x0, y0], [x1, y1])?),
            _ => Err("arena must be min_x,min_y,max_x,max_y".into()),
        }
    }

    fn bins(&self) -> Result<(usize, usize), BoxError> {
        Ok((self.usize("bins_x")?, self.usize("bins_y")?))
    }

    fn cameras(&self) -> Option<Vec<String>> {
        self.opt_text("cameras")
            .map(|s| s.split(',').map(|c| c.trim().to_string()).collect())
    }
}

fn expect_3d(data: StageData) -> Result<PoseSequence, BoxError> {
    match data {
        StageData::Pose3d(s) => Ok(s),
        other => Err(format!("expected pose3d input, got {}", other.kind()).into()),
    }
}

fn expect_2d(data: StageData) -> Result<Vec<View>, BoxError> {
    match data {
        StageData::Pose2d(v) => Ok(v),
        other => Err(format!("expected pose2d input, got {}", other.kind()).into()),
    }
}

fn apply_filter(op: &str, seq: &PoseSequence, p: &Params) -> Result<PoseSequence, BoxError> {
    Ok(match op {
        "kalman" => {
            let k = KalmanParams::new(
                p.real("process_noise")?,
                p.real("measurement_noise")?,
                p.real("initial_variance")?,
            )?;
            filters::kalman_filter(seq, &k)?
        }
        "linear_interpolate" => filters::linear_interpolate(seq, p.usize("max_gap")?),
        "moving_average" => filters::moving_average(seq, p.usize("window")?)?,
        "velocity_filter" => filters::velocity_filter(seq, p.real("max_speed")?)?,
        "statistical_distance_filter" => {
            filters::statistical_distance_filter(seq, p.usize("window")?, p.real("z_max")?)?
        }
        other => return Err(format!("unknown filter `{other}`").into()),
    })
}

const FILTER_OPS: [&str; 5] = [
    "kalman",
    "linear_interpolate",
    "moving_average",
    "velocity_filter",
    "statistical_distance_filter",
];

fn run_builtin(op: &str, data: StageData, p: &Params) -> Result<(StageData, Vec<PathBuf>), BoxError> {
    if FILTER_OPS.contains(&op) {
        return Ok((StageData::Pose3d(apply_filter(op, &expect_3d(data)?, p)?), Vec::new()));
    }
    if let Some(base) = op.strip_suffix("_2d").filter(|b| FILTER_OPS.contains(b)) {
        let views = expect_2d(data)?
            .into_iter()
            .map(|v| {
                Ok(View {
                    seq: apply_filter(base, &v.seq, p)?,
                    camera: v.camera,
                })
            })
            .collect::<Result<_, BoxError>>()?;
        return Ok((StageData::Pose2d(views), Vec::new()));
    }
    let table = |t: TableData| Ok((StageData::Table(t), Vec::new()));
    match op {
        "loader" => {
            let seq = read_pose_file(p.path("path")?, p.format()?)?;
            if seq.dims() != 3 {
                return Err(format!("loader produces 3D poses but the file is {}D; use loader2d", seq.dims()).into());
            }
            Ok((StageData::Pose3d(seq), Vec::new()))
        }
        "loader2d" => Ok((
            StageData::Pose2d(load_views(&p.path("path")?, p.format()?)?),
            Vec::new(),
        )),
        "saver" => {
            let path = p.path("path")?;
            write_pose_file(&expect_3d(data)?, &path, p.format()?)?;
            Ok((StageData::None, vec![path]))
        }
        "saver2d" => {
            let dir = p.path("path")?;
            std::fs::create_dir_all(&dir)?;
            let format = p.format()?;
            let mut written = Vec::new();
            for v in expect_2d(data)? {
                let path = dir.join(format!("{}.csv", v.camera));
                write_pose_file(&v.seq, &path, format)?;
                written.push(path);
            }
            Ok((StageData::None, written))
        }
        "table_saver" => {
            let StageData::Table(t) = data else {
                return Err("expected table input".into());
            };
            let path = p.path("path")?;
            std::fs::write(&path, &t.text)?;
            Ok((StageData::None, vec![path]))
        }
        "statistics" => table(TableData::csv(input_statistics(&expect_3d(data)?)?.to_csv_string())),
        "statistics_2d" => {
            let mut text = String::from("camera,part,stat,value\n");
            for v in expect_2d(data)? {
                let csv = input_statistics(&v.seq)?.to_csv_string();
                for line in csv.lines().skip(1) {
                    text.push_str(&format!("{},{line}\n", csv_field(&v.camera)));
                }
            }
            table(TableData::csv(text))
        }
        "frame_loader" => {
            let path = p.path("path")?;
            let backend = p.text("backend")?.to_string();
            let capacity = p.usize("buffer_capacity")?;
            let stream = BackendRegistry::default().open_stream(&path, &backend, capacity)?;
            let (width, height) = stream.dimensions();
            Ok((
                StageData::Frames(FrameSource {
                    path,
                    backend,
                    buffer_capacity: capacity,
                    frame_count: stream.frame_count(),
                    width,
                    height,
                }),
                Vec::new(),
            ))
        }
        "frame_summary" => {
            let StageData::Frames(src) = data else {
                return Err("expected frames input".into());
            };
            let stream = BackendRegistry::default().open_stream(&src.path, &src.backend, src.buffer_capacity)?;
            let mut text = String::from("frame,mean_intensity,checksum\n");
            for frame in stream {
                let frame = frame?;
                let mean = frame.pixels.iter().map(|&b| b as f64).sum::<f64>() / frame.pixels.len().max(1) as f64;
                text.push_str(&format!(
                    "{},{mean},{:016x}\n",
                    frame.index,
                    frame_io::frame_checksum(&frame)
                ));
            }
            table(TableData::csv(text))
        }
        "align_axes" => {
            let seq = expect_3d(data)?;
            let idx = |k: &str| -> Result<usize, BoxError> {
                let name = p.text(k)?;
                seq.part_index(name)
                    .ok_or_else(|| format!("unknown part `{name}`").into())
            };
            let (o, x, xy) = (idx("origin")?, idx("x_axis")?, idx("xy_plane")?);
            let frame = (0..seq.len())
                .find(|&i| seq.is_valid(i, o) && seq.is_valid(i, x) && seq.is_valid(i, xy))
                .ok_or("no frame has all three alignment parts valid")?;
            let pt = |j: usize| {
                let c = &seq.skeletons()[frame].parts[j].coords;
                Point3::new(c[0], c[1], c[2])
            };
            let t = geometry::align_axes(&pt(o), &pt(x), &pt(xy))?;
            Ok((StageData::Pose3d(geometry::apply_rigid(&t, &seq)?), Vec::new()))
        }
        "reconstruct" => {
            let cams = load_dlt_coefficients(p.path("dlt")?)?;
            Ok((
                StageData::Pose3d(reconstruct_views(&expect_2d(data)?, &cams, p.cameras())?),
                Vec::new(),
            ))
        }
        "reproject" => {
            let cams = load_dlt_coefficients(p.path("dlt")?)?;
            Ok((
                StageData::Pose2d(reproject_views(&expect_3d(data)?, &cams, p.cameras())?),
                Vec::new(),
            ))
        }
        "occupancy_map" => {
            let seq = expect_3d(data)?;
            let m = behavior::occupancy_map(&seq, p.text("anchor")?, &p.arena()?, p.bins()?)?;
            table(grid_table(&m.grid, Vec::new())?)
        }
        "gaze_heatmap" => {
            let seq = expect_3d(data)?;
            let walls = behavior::load_walls(p.path("walls")?)?;
            let maps = behavior::gaze_heatmap(&seq, p.text("base")?, p.text("tip")?, &walls, p.real("sigma")?)?;
            let mut text = String::from("wall,ix,iy,u_lo,u_hi,v_lo,v_hi,value\n");
            let mut extras = Vec::new();
            for (name, g) in &maps {
                for iy in 0..g.ny() {
                    for ix in 0..g.nx() {
                        text.push_str(&format!(
                            "{},{ix},{iy},{},{},{},{},{}\n",
                            csv_field(name),
                            g.x_edges()[ix],
                            g.x_edges()[ix + 1],
                            g.y_edges()[iy],
                            g.y_edges()[iy + 1],
                            g.get(ix, iy)
                        ));
                    }
                }
                extras.push((format!("{name}.png"), g.render_png(8)?));
            }
            table(TableData { text, extras })
        }
        "rearing" => {
            let seq = expect_3d(data)?;
            let r = behavior::detect_rearing(
                &seq,
                p.text("anchor")?,
                p.real("z_min")?,
                p.usize("min_frames")?,
                &p.arena()?,
                p.bins()?,
            )?;
            let mut text = String::from("start_frame,end_frame,x,y\n");
            for e in &r.events {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    e.start_frame, e.end_frame, e.location[0], e.location[1]
                ));
            }
            let grid = r.grid.to_csv_string().into_bytes();
            let png = r.grid.render_png(8)?;
            table(TableData {
                text,
                extras: vec![("grid.csv".into(), grid), ("png".into(), png)],
            })
        }
        "ebc_rate_map" => {
            let seq = expect_3d(data)?;
            let spikes = SpikeTrain::load(p.path("spikes")?)?;
            let mut params = EbcParams::with_max_dist(p.real("max_dist")?);
            params.angle_bins = p.usize("angle_bins")?;
            if p.opt_text("dist_bins").is_some() {
                params.dist_bins = p.usize("dist_bins")?;
            }
            params.min_occupancy_s = p.real("min_occupancy_s")?;
            let maps = behavior::ebc_rate_map(
                &seq,
                p.text("anchor")?,
                p.text("base")?,
                p.text("tip")?,
                &spikes,
                &p.arena()?,
                &params,
            )?;
            let occupancy = maps.occupancy.to_csv_string().into_bytes();
            table(grid_table(&maps.rate, vec![("occupancy.csv".into(), occupancy)])?)
        }
        "spike_locations" => {
            let seq = expect_3d(data)?;
            let spikes = SpikeTrain::load(p.path("spikes")?)?;
            let out = behavior::spike_location_data(&seq, p.text("anchor")?, p.text("base")?, p.text("tip")?, &spikes)?;
            let mut buf = Vec::new();
            out.write_csv(&mut buf)?;
            table(TableData::csv(String::from_utf8(buf)?))
        }
        other => Err(format!("no builtin operation `{other}`").into()),
    }
}

fn grid_table(grid: &behavior::AnalysisGrid, mut extras: Vec<(String, Vec<u8>)>) -> Result<TableData, BoxError> {
    extras.push(("png".into(), grid.render_png(8)?));
    Ok(TableData {
        text: grid.to_csv_string(),
        extras,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A single file is one view named after its stem; a directory holds one
/// `*.csv` view per camera, ordered by file name.
pub fn load_views(path: &Path, format: PoseFormat) -> Result<Vec<View>, BoxError> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut f: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
            .collect();
        f.sort();
        f
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(format!("no pose files in {}", path.display()).into());
    }
    files
        .iter()
        .map(|f| {
            let seq = read_pose_file(f, format)?;
            if seq.dims() != 2 {
                return Err(format!("{} is {}D, expected 2D", f.display(), seq.dims()).into());
            }
            let camera = f.file_stem().and_then(|s| s.to_str()).unwrap_or("camera").to_string();
            Ok(View { camera, seq })
        })
        .collect()
}

/// Pairs cameras with views: by the `cameras` list when given, otherwise
/// view order equals DLT column order.
fn camera_order(
    n_views: usize,
    view_names: &[&str],
    cams: usize,
    cameras: Option<Vec<String>>,
) -> Result<Vec<usize>, BoxError> {
    match cameras {
        Some(names) => {
            if names.len() > cams {
                return Err(format!("{} camera names but only {cams} DLT columns", names.len()).into());
            }
            names
                .iter()
                .map(|n| {
                    view_names
                        .iter()
                        .position(|v| v == n)
                        .ok_or_else(|| format!("no view named `{n}`").into())
                })
                .collect()
        }
        None if n_views == cams => Ok((0..n_views).collect()),
        None => Err(format!("{n_views} views but {cams} DLT columns; bind `cameras`").into()),
    }
}

/// Triangulates every part in every frame seen by any view. The 3D score is
/// the mean score of the contributing views; parts seen validly by fewer than
/// two views, or whose system is degenerate, are missing.
pub fn reconstruct_views(
    views: &[View],
    cams: &[CameraProfile],
    cameras: Option<Vec<String>>,
) -> Result<PoseSequence, BoxError> {
    let first = views.first().ok_or("no views to reconstruct")?;
    let names: Vec<&str> = views.iter().map(|v| v.camera.as_str()).collect();
    let order = camera_order(views.len(), &names, cams.len(), cameras)?;
    for v in views {
        if v.seq.part_order() != first.seq.part_order() {
            return Err(format!("view `{}` has a different part order", v.camera).into());
        }
    }
    let frames: BTreeSet<u64> = order
        .iter()
        .flat_map(|&vi| views[vi].seq.skeletons().iter().map(|s| s.frame_index))
        .collect();
    let positions: Vec<BTreeMap<u64, usize>> = views
        .iter()
        .map(|v| {
            v.seq
                .skeletons()
                .iter()
                .enumerate()
                .map(|(i, s)| (s.frame_index, i))
                .collect()
        })
        .collect();
    let mut out = PoseSequence::new(first.seq.part_order().to_vec(), 3)?
        .with_fps(first.seq.fps)
        .with_threshold(first.seq.score_threshold);
    for frame in frames {
        let mut parts = Vec::with_capacity(first.seq.part_order().len());
        for (j, name) in first.seq.part_order().iter().enumerate() {
            let mut obs = Vec::new();
            for (col, &vi) in order.iter().enumerate() {
                let v = &views[vi];
                if let Some(&i) = positions[vi].get(&frame) {
                    if v.seq.is_valid(i, j) {
                        let p = &v.seq.skeletons()[i].parts[j];
                        obs.push(Observation::new(col, Point2::new(p.coords[0], p.coords[1]), p.score));
                    }
                }
            }
            let part = match dlt_reconstruct(cams, &obs, 0.0) {
                Ok(r) => {
                    let score = obs.iter().map(|o| o.score).sum::<f64>() / obs.len() as f64;
                    Part::new(name.clone(), vec![r.point.x, r.point.y, r.point.z], score)
                }
                Err(_) => Part::missing(name.clone(), 3),
            };
            parts.push(part);
        }
        out.push(Skeleton::new(frame, parts))?;
    }
    Ok(out)
}

pub fn reproject_views(
    seq: &PoseSequence,
    cams: &[CameraProfile],
    cameras: Option<Vec<String>>,
) -> Result<Vec<View>, BoxError> {
    let names: Vec<String> = match cameras {
        Some(n) if n.len() == cams.len() => n,
        Some(n) => return Err(format!("{} camera names for {} DLT columns", n.len(), cams.len()).into()),
        None => cams.iter().map(|c| c.name.clone()).collect(),
    };
    let mut views = Vec::new();
    for (cam, name) in cams.iter().zip(names) {
        let mut out = PoseSequence::new(seq.part_order().to_vec(), 2)?
            .with_fps(seq.fps)
            .with_threshold(seq.score_threshold);
        for (i, skel) in seq.skeletons().iter().enumerate() {
            let parts = skel
                .parts
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    let projected = seq
                        .is_valid(i, j)
                        .then(|| dlt_project(cam, &Point3::new(p.coords[0], p.coords[1], p.coords[2])).ok())
                        .flatten();
                    match projected {
                        Some(uv) => Part::new(p.name.clone(), vec![uv.x, uv.y], p.score),
                        None => Part::missing(p.name.clone(), 2),
                    }
                })
                .collect();
            let mut s = Skeleton::new(skel.frame_index, parts);
            s.behaviors = skel.behaviors.clone();
            out.push(s)?;
        }
        views.push(View { camera: name, seq: out });
    }
    Ok(views)
}

/// Writes the artifact for one stage output. Pose2d artifacts are an index
/// `camera,file` with one cvkit file per view next to it.
fn write_artifacts(workspace: &Path, index: usize, id: &str, data: &StageData) -> Result<Vec<PathBuf>, BoxError> {
    let main = workspace.join(stage_artifact_name(index, id));
    let stem = format!("stage_{index}_{id}");
    let mut out = vec![main.clone()];
    match data {
        StageData::None => return Ok(Vec::new()),
        StageData::Pose3d(seq) => write_pose_file(seq, &main, PoseFormat::Cvkit)?,
        StageData::Pose2d(views) => out.extend(write_view_index(&main, &stem, views)?),
        StageData::Frames(f) => {
            let mut w = csv::Writer::from_path(&main)?;
            w.write_record(["source", "backend", "frame_count", "width", "height"])?;
            w.write_record([
                f.path.display().to_string(),
                f.backend.clone(),
                f.frame_count.map_or_else(String::new, |n| n.to_string()),
                f.width.to_string(),
                f.height.to_string(),
            ])?;
            w.flush()?;
        }
        StageData::Table(t) => {
            std::fs::write(&main, &t.text)?;
            for (suffix, bytes) in &t.extras {
                let p = workspace.join(format!("{stem}.{suffix}"));
                std::fs::write(&p, bytes)?;
                out.push(p);
            }
        }
    }
    Ok(out)
}

fn write_view_index(index_path: &Path, stem: &str, views: &[View]) -> Result<Vec<PathBuf>, BoxError> {
    let dir = index_path.parent().unwrap_or(Path::new("."));
    let mut w = csv::Writer::from_path(index_path)?;
    w.write_record(["camera", "file"])?;
    let mut files = Vec::new();
    for v in views {
        let name = format!("{stem}.{}.csv", v.camera);
        write_pose_file(&v.seq, dir.join(&name), PoseFormat::Cvkit)?;
        w.write_record([v.camera.as_str(), name.as_str()])?;
        files.push(dir.join(name));
    }
    w.flush()?;
    Ok(files)
}

/// Reads a view index written by a pose2d stage or an external processor.
pub(crate) fn read_view_index(index_path: &Path) -> Result<Vec<View>, BoxError> {
    let dir = index_path.parent().unwrap_or(Path::new("."));
    let mut r = csv::Reader::from_path(index_path)?;
    let mut views = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err("view index rows are camera,file".into());
        }
        views.push(View {
            camera: rec[0].to_string(),
            seq: read_pose_file(dir.join(&rec[1]), PoseFormat::Cvkit)?,
        });
    }
    Ok(views)
}

enum ExternalError {
    Exit { code: Option<i32>, stderr: String },
    Other(BoxError),
}

impl<E: Into<BoxError>> From<E> for ExternalError {
    fn from(e: E) -> Self {
        ExternalError::Other(e.into())
    }
}

/// Materializes the input in its artifact format, runs the command without
/// a shell in `workspace`, and parses `{output}` by the declared kind.
fn run_external(
    template: &str,
    m: &ProcessorManifest,
    data: StageData,
    p: &Params,
    workspace: &Path,
    index: usize,
) -> Result<(StageData, Vec<PathBuf>), ExternalError> {
    let stem = format!("stage_{index}_{}", m.id);
    let input = match &data {
        StageData::None => PathBuf::new(),
        StageData::Frames(f) => f.path.clone(),
        other => {
            let path = workspace.join(format!("{stem}.input.csv"));
            match other {
                StageData::Pose3d(seq) => write_pose_file(seq, &path, PoseFormat::Cvkit)?,
                StageData::Pose2d(views) => {
                    write_view_index(&path, &format!("{stem}.input"), views)?;
                }
                StageData::Table(t) => std::fs::write(&path, &t.text)?,
                _ => unreachable!(),
            }
            path
        }
    };
    let output = workspace.join(format!("{stem}.output.csv"));
    let words = split_command(template)?;
    let lookup = |key: &str| match key {
        "input" => input.display().to_string(),
        "output" => output.display().to_string(),
        k => p.opt_text(k).unwrap_or_default().to_string(),
    };
    let words: Vec<String> = words.iter().map(|w| substitute(w, &lookup)).collect();
    let (program, args) = words.split_first().ok_or("empty command template")?;
    let result = Command::new(program)
        .args(args)
        .current_dir(workspace)
        .output()
        .map_err(|e| format!("cannot start `{program}`: {e}"))?;
    if !result.status.success() {
        return Err(ExternalError::Exit {
            code: result.status.code(),
            stderr: String::from_utf8_lossy(&result.stderr).into_owned(),
        });
    }
    let out = match m.output_kind {
        DataKind::None => StageData::None,
        DataKind::Pose3d => StageData::Pose3d(read_pose_file(&output, PoseFormat::Cvkit)?),
        DataKind::Pose2d => StageData::Pose2d(read_view_index(&output)?),
        DataKind::Table => StageData::Table(TableData::csv(std::fs::read_to_string(&output)?)),
        DataKind::Frames => return Err("external processors cannot produce frames".into()),
    };
    let mut artifacts = Vec::new();
    if output.exists() {
        artifacts.push(output);
    }
    Ok((out, artifacts))
}
