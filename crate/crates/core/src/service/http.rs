//! Endpoints. Request and response bodies are JSON unless noted.
//!
//! | Endpoint | Request | Response |
//! |---|---|---|
//! | `GET /processors` | | `{processors: [manifest], warnings: [string]}` |
//! | `GET /project` | | project |
//! | `POST /project` | project | project |
//! | `GET /frames/{camera}/{index}` | | PNG |
//! | `GET /annotations?camera=&frame=` | | `{annotations: [annotation]}` |
//! | `POST /annotations` | `{annotations: [annotation]}` | `{stored}` |
//! | `DELETE /annotations?camera=&frame=&part=` | | removed annotation |
//! | `POST /annotations/interpolate` | `{camera, part, frame_a, frame_b}` | `{written}` |
//! | `POST /reproject` | `{frame, part, store?}` | proposal |
//! | `POST /calibration/select-frames` | `{k}` | `{frames}` |
//! | `POST /calibration/export-easywand` | `{frames?, k?, dir?}` | `{frames, dir}` |
//! | `POST /calibration/import-dlt` | `{csv? , path?, cameras?}` | project |
//! | `GET /pipelines` | | `{pipelines: [{id, text, config}]}` |
//! | `POST /pipelines` | `{id, text}` | `{id, text, config}` |
//! | `POST /pipelines/{id}/run` | | 202 `{run_id}` |
//! | `GET /runs/{id}` | | run status |
//! | `GET /runs/{id}/artifacts/{stage}?suffix=` | | artifact bytes |
//!
//! Errors are `{code, message, detail}`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    atomic_write, interpolate_annotations, reprojection_assist, Annotation, AnnotationStore, Project, Provenance,
    ServiceError, PIPELINES_DIR, PIPELINE_EXTENSION, PROCESSORS_DIR, RUNS_DIR,
};
use crate::frame_io::{BackendRegistry, FrameError};
use crate::geometry::{
    export_easywand_package, load_dlt_coefficients, read_dlt_coefficients, select_calibration_frames, GeometryError,
};
use crate::pipeline::{
    run_pipeline, scan_registry, stage_artifact_name, validate_pipeline, PipelineConfig, PipelineError, Registry,
    RunReport,
};

const STATUS_FILE: &str = "status.json";

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::NotFound(_) => "NotFound",
            ServiceError::MissingEndpoints { .. } => "MissingEndpoints",
            ServiceError::InvalidProject(_) => "InvalidProject",
            ServiceError::Corrupt(_) => "Corrupt",
            ServiceError::InvalidPipeline(_) => "InvalidPipeline",
            ServiceError::PortInUse(_) => "PortInUse",
            ServiceError::Geometry(e) => match e {
                GeometryError::InsufficientViews(_) => "InsufficientViews",
                GeometryError::RankDeficient(_) => "RankDeficient",
                GeometryError::DegenerateDenominator(_) => "DegenerateDenominator",
                GeometryError::EmptyAnnotationSet => "EmptyAnnotationSet",
                GeometryError::NotEnoughAnnotatedFrames { .. } => "NotEnoughAnnotatedFrames",
                GeometryError::MalformedCsv(_) => "MalformedCsv",
                _ => "GeometryError",
            },
            ServiceError::Frame(e) => match e {
                FrameError::OutOfRange { .. } => "OutOfRange",
                FrameError::UnknownBackend(_) => "UnknownBackend",
                FrameError::UnreadableSource { .. } => "UnreadableSource",
                FrameError::DecodeFailure { .. } => "DecodeFailure",
                FrameError::InvalidArgument(_) => "InvalidArgument",
            },
            ServiceError::Pipeline(e) => match e {
                PipelineError::MalformedConfig { .. } => "MalformedConfig",
                PipelineError::MalformedManifest { .. } => "MalformedManifest",
                PipelineError::Invalid(_) => "InvalidPipeline",
                PipelineError::StageFailure { .. } => "StageFailure",
                PipelineError::ExternalProcessError { .. } => "ExternalProcessError",
                PipelineError::KindMismatch { .. } => "KindMismatch",
                PipelineError::UnknownProcessor(_) => "UnknownProcessor",
                PipelineError::EmptySequence => "EmptySequence",
                PipelineError::Io(_) => "Io",
            },
            ServiceError::Behavior(_) => "BehaviorError",
            ServiceError::Io(_) => "Io",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Frame(FrameError::OutOfRange { .. }) => StatusCode::NOT_FOUND,
            ServiceError::Corrupt(_) | ServiceError::Io(_) | ServiceError::PortInUse(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            ServiceError::Pipeline(PipelineError::Io(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    pub fn detail(&self) -> Value {
        match self {
            ServiceError::InvalidPipeline(d) | ServiceError::Pipeline(PipelineError::Invalid(d)) => json!(d),
            ServiceError::MissingEndpoints {
                camera,
                part,
                frame_a,
                frame_b,
            } => {
                json!({"camera": camera, "part": part, "frame_a": frame_a, "frame_b": frame_b})
            }
            ServiceError::Pipeline(PipelineError::MalformedConfig { line, .. }) => json!({"line": line}),
            ServiceError::Pipeline(e) => match e.partial_report() {
                Some(r) => json!({"report": r}),
                None => Value::Null,
            },
            _ => Value::Null,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"code": self.code(), "message": self.to_string(), "detail": self.detail()})
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.to_json())).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

/// Shared service state. Everything persistent lives in the project dir.
pub struct AppState {
    dir: PathBuf,
    registry: Registry,
    writer: tokio::sync::Mutex<()>,
    run_queue: Arc<std::sync::Mutex<()>>,
    next_run: AtomicU64,
}

impl AppState {
    /// Validates the project dir and scans its `processors/` manifests.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Arc<Self>, ServiceError> {
        let dir = dir.into();
        Project::load(&dir)?;
        AnnotationStore::load(&dir)?;
        let processors = dir.join(PROCESSORS_DIR);
        let dirs: Vec<PathBuf> = processors.is_dir().then_some(processors).into_iter().collect();
        let registry = scan_registry(&dirs)?;
        let next = std::fs::read_dir(dir.join(RUNS_DIR))
            .map(|rd| {
                rd.filter_map(|e| e.ok()?.file_name().to_str()?.parse::<u64>().ok())
                    .max()
                    .map_or(1, |m| m + 1)
            })
            .unwrap_or(1);
        Ok(Arc::new(Self {
            dir,
            registry,
            writer: tokio::sync::Mutex::new(()),
            run_queue: Arc::new(std::sync::Mutex::new(())),
            next_run: AtomicU64::new(next),
        }))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }
}

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/processors", get(processors))
        .route("/project", get(get_project).post(post_project))
        .route("/frames/{camera}/{index}", get(frame_png))
        .route(
            "/annotations",
            get(get_annotations).post(post_annotations).delete(delete_annotation),
        )
        .route("/annotations/interpolate", post(interpolate))
        .route("/reproject", post(reproject))
        .route("/calibration/select-frames", post(select_frames))
        .route("/calibration/export-easywand", post(export_easywand))
        .route("/calibration/import-dlt", post(import_dlt))
        .route("/pipelines", get(list_pipelines).post(post_pipeline))
        .route("/pipelines/{id}/run", post(start_run))
        .route("/runs/{id}", get(run_status))
        .route("/runs/{id}/artifacts/{stage}", get(run_artifact))
        .with_state(state)
}

/// Serves `dir` on localhost until the task is cancelled.
pub async fn serve(dir: PathBuf, port: u16) -> Result<(), ServiceError> {
    let state = AppState::open(dir)?;
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServiceError::PortInUse(port),
        _ => ServiceError::Io(e.to_string()),
    })?;
    log::info!("serving {} on http://{}", state.dir.display(), listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

fn resolve(dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(format!("worker failed: {e}")))?
}

async fn processors(State(s): Shared) -> Json<Value> {
    Json(json!({"processors": s.registry.manifests(), "warnings": s.registry.warnings}))
}

async fn get_project(State(s): Shared) -> ApiResult<Json<Project>> {
    Ok(Json(Project::load(&s.dir)?))
}

async fn post_project(State(s): Shared, Json(p): Json<Project>) -> ApiResult<Json<Project>> {
    let _w = s.writer.lock().await;
    p.save(&s.dir)?;
    Ok(Json(p))
}

async fn frame_png(State(s): Shared, UrlPath((camera, index)): UrlPath<(String, u64)>) -> ApiResult<Response> {
    let project = Project::load(&s.dir)?;
    let cam = project
        .cameras
        .iter()
        .find(|c| c.name == camera)
        .ok_or_else(|| ServiceError::NotFound(format!("camera `{camera}`")))?;
    let source = resolve(
        &s.dir,
        cam.frames
            .as_deref()
            .ok_or_else(|| ServiceError::NotFound(format!("camera `{camera}` has no frame source")))?,
    );
    let backend = cam.backend.clone();
    let png = blocking(move || {
        let mut reader = BackendRegistry::default().open_unbuffered(&source, &backend)?;
        let frame = reader
            .read_at(index)?
            .ok_or_else(|| ServiceError::NotFound(format!("frame {index} of `{camera}`")))?;
        Ok(frame.to_png()?)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Deserialize)]
struct AnnotationQuery {
    camera: Option<String>,
    frame: Option<u64>,
    part: Option<String>,
}

async fn get_annotations(State(s): Shared, Query(q): Query<AnnotationQuery>) -> ApiResult<Json<Value>> {
    let store = AnnotationStore::load(&s.dir)?;
    let mut list = store.query(q.camera.as_deref(), q.frame);
    if let Some(part) = &q.part {
        list.retain(|a| &a.part == part);
    }
    Ok(Json(json!({"annotations": list})))
}

#[derive(Deserialize)]
struct AnnotationBatch {
    annotations: Vec<Annotation>,
}

async fn post_annotations(State(s): Shared, Json(b): Json<AnnotationBatch>) -> ApiResult<Json<Value>> {
    let _w = s.writer.lock().await;
    let mut store = AnnotationStore::load(&s.dir)?;
    let n = b.annotations.len();
    for a in b.annotations {
        store.upsert(a)?;
    }
    store.save(&s.dir)?;
    Ok(Json(json!({"stored": n})))
}

async fn delete_annotation(State(s): Shared, Query(q): Query<AnnotationQuery>) -> ApiResult<Json<Annotation>> {
    let (Some(camera), Some(frame), Some(part)) = (q.camera, q.frame, q.part) else {
        return Err(ServiceError::BadRequest("camera, frame and part are required".into()));
    };
    let _w = s.writer.lock().await;
    let mut store = AnnotationStore::load(&s.dir)?;
    let removed = store
        .remove(&camera, frame, &part)
        .ok_or_else(|| ServiceError::NotFound(format!("annotation {camera}/{frame}/{part}")))?;
    store.save(&s.dir)?;
    Ok(Json(removed))
}

#[derive(Deserialize)]
struct InterpolateRequest {
    camera: String,
    part: String,
    frame_a: u64,
    frame_b: u64,
}

async fn interpolate(State(s): Shared, Json(r): Json<InterpolateRequest>) -> ApiResult<Json<Value>> {
    let _w = s.writer.lock().await;
    let mut store = AnnotationStore::load(&s.dir)?;
    let written = interpolate_annotations(&mut store, &r.camera, &r.part, r.frame_a, r.frame_b)?;
    store.save(&s.dir)?;
    Ok(Json(json!({"written": written})))
}

#[derive(Deserialize)]
struct ReprojectRequest {
    frame: u64,
    part: String,
    /// Store proposals as `projected` points where nothing is annotated.
    #[serde(default)]
    store: bool,
}

async fn reproject(State(s): Shared, Json(r): Json<ReprojectRequest>) -> ApiResult<Json<Value>> {
    let _w = s.writer.lock().await;
    let project = Project::load(&s.dir)?;
    let mut store = AnnotationStore::load(&s.dir)?;
    let proposal = reprojection_assist(&store, &project.calibrated(), r.frame, &r.part)?;
    if r.store {
        for p in &proposal.proposals {
            let annotated = store
                .get(&p.camera, p.frame, &p.part)
                .is_some_and(|a| a.provenance == Provenance::Annotated);
            if !annotated {
                store.upsert(p.clone())?;
            }
        }
        store.save(&s.dir)?;
    }
    let missing: Vec<&str> = project
        .cameras
        .iter()
        .filter(|c| c.profile.is_none())
        .map(|c| c.name.as_str())
        .collect();
    let mut body = json!(proposal);
    body["uncalibrated"] = json!(missing);
    Ok(Json(body))
}

#[derive(Deserialize)]
struct SelectRequest {
    k: usize,
}

async fn select_frames(State(s): Shared, Json(r): Json<SelectRequest>) -> ApiResult<Json<Value>> {
    let project = Project::load(&s.dir)?;
    let store = AnnotationStore::load(&s.dir)?;
    let frames = select_calibration_frames(&store.camera_annotations(&project.camera_names()), r.k)?;
    Ok(Json(json!({"frames": frames})))
}

#[derive(Deserialize)]
struct ExportRequest {
    frames: Option<Vec<u64>>,
    k: Option<usize>,
    dir: Option<String>,
}

async fn export_easywand(State(s): Shared, Json(r): Json<ExportRequest>) -> ApiResult<Json<Value>> {
    let _w = s.writer.lock().await;
    let project = Project::load(&s.dir)?;
    let store = AnnotationStore::load(&s.dir)?;
    let ann = store.camera_annotations(&project.camera_names());
    let frames = match (r.frames, r.k) {
        (Some(f), _) => f,
        (None, Some(k)) => select_calibration_frames(&ann, k)?,
        (None, None) => return Err(ServiceError::BadRequest("give `frames` or `k`".into())),
    };
    let rel = r.dir.unwrap_or_else(|| "easywand".into());
    let exported = export_easywand_package(&ann, &frames, resolve(&s.dir, &rel))?;
    Ok(Json(json!({"frames": exported, "dir": rel})))
}

#[derive(Deserialize)]
struct ImportRequest {
    csv: Option<String>,
    path: Option<String>,
    /// Project camera for each coefficient column; project order by default.
    cameras: Option<Vec<String>>,
}

async fn import_dlt(State(s): Shared, Json(r): Json<ImportRequest>) -> ApiResult<Json<Project>> {
    let profiles = match (r.csv, r.path) {
        (Some(text), _) => read_dlt_coefficients(text.as_bytes())?,
        (None, Some(p)) => load_dlt_coefficients(resolve(&s.dir, &p))?,
        (None, None) => return Err(ServiceError::BadRequest("give `csv` or `path`".into())),
    };
    let _w = s.writer.lock().await;
    let mut project = Project::load(&s.dir)?;
    let targets = r.cameras.unwrap_or_else(|| project.camera_names());
    if targets.len() != profiles.len() {
        return Err(ServiceError::BadRequest(format!(
            "{} coefficient columns for {} cameras",
            profiles.len(),
            targets.len()
        )));
    }
    for (name, profile) in targets.iter().zip(profiles) {
        let cam = project
            .cameras
            .iter_mut()
            .find(|c| &c.name == name)
            .ok_or_else(|| ServiceError::NotFound(format!("camera `{name}`")))?;
        let (width, height) = cam.profile.as_ref().map_or((0, 0), |p| (p.width, p.height));
        cam.profile = Some(crate::geometry::CameraProfile {
            name: name.clone(),
            width,
            height,
            ..profile
        });
    }
    project.save(&s.dir)?;
    Ok(Json(project))
}

fn check_id(id: &str) -> ApiResult<()> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(ServiceError::BadRequest(format!("id `{id}` must be [A-Za-z0-9_-]+")));
    }
    Ok(())
}

fn pipeline_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(PIPELINES_DIR).join(format!("{id}.{PIPELINE_EXTENSION}"))
}

/// Loads a stored pipeline with relative paths resolved against the project.
fn load_pipeline(dir: &Path, id: &str) -> ApiResult<PipelineConfig> {
    check_id(id)?;
    let path = pipeline_path(dir, id);
    if !path.is_file() {
        return Err(ServiceError::NotFound(format!("pipeline `{id}`")));
    }
    let mut cfg = PipelineConfig::load(&path)?;
    cfg.base_dir = Some(dir.to_path_buf());
    Ok(cfg)
}

async fn list_pipelines(State(s): Shared) -> ApiResult<Json<Value>> {
    let mut ids: Vec<String> = match std::fs::read_dir(s.dir.join(PIPELINES_DIR)) {
        Ok(rd) => rd
            .filter_map(|e| {
                let p = e.ok()?.path();
                (p.extension()? == PIPELINE_EXTENSION).then(|| p.file_stem()?.to_str().map(String::from))?
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    ids.sort();
    let mut out = Vec::new();
    for id in ids {
        let cfg = load_pipeline(&s.dir, &id)?;
        out.push(json!({"id": id, "text": cfg.to_text(), "config": cfg}));
    }
    Ok(Json(json!({"pipelines": out})))
}

#[derive(Deserialize)]
struct PipelineRequest {
    id: String,
    text: String,
}

async fn post_pipeline(State(s): Shared, Json(r): Json<PipelineRequest>) -> ApiResult<Json<Value>> {
    check_id(&r.id)?;
    let cfg = PipelineConfig::parse(&r.text)?;
    let diagnostics = validate_pipeline(&cfg, &s.registry);
    if !diagnostics.is_empty() {
        return Err(ServiceError::InvalidPipeline(diagnostics));
    }
    let text = cfg.to_text();
    let _w = s.writer.lock().await;
    std::fs::create_dir_all(s.dir.join(PIPELINES_DIR))?;
    atomic_write(&pipeline_path(&s.dir, &r.id), text.as_bytes())?;
    Ok(Json(json!({"id": r.id, "text": text, "config": cfg})))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunState {
    Queued,
    Running,
    Succeeded,
    Failed,
}

/// Contents of `runs/<id>/status.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunStatus {
    pub id: String,
    pub pipeline: String,
    pub state: RunState,
    pub stages_total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

fn write_status(ws: &Path, status: &RunStatus) -> ApiResult<()> {
    let json = serde_json::to_vec_pretty(status).expect("status serializes");
    atomic_write(&ws.join(STATUS_FILE), &json)
}

async fn start_run(State(s): Shared, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let cfg = load_pipeline(&s.dir, &id)?;
    let diagnostics = validate_pipeline(&cfg, &s.registry);
    if !diagnostics.is_empty() {
        return Err(ServiceError::InvalidPipeline(diagnostics));
    }
    let runs = s.dir.join(RUNS_DIR);
    std::fs::create_dir_all(&runs)?;
    let (run_id, ws) = loop {
        let n = s.next_run.fetch_add(1, Ordering::SeqCst);
        let ws = runs.join(n.to_string());
        match std::fs::create_dir(&ws) {
            Ok(()) => break (n.to_string(), ws),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    };
    let mut status = RunStatus {
        id: run_id.clone(),
        pipeline: id,
        state: RunState::Queued,
        stages_total: cfg.stages.len(),
        report: None,
        error: None,
    };
    write_status(&ws, &status)?;
    let state = s.clone();
    tokio::task::spawn_blocking(move || {
        let _turn = state.run_queue.lock().unwrap_or_else(|p| p.into_inner());
        status.state = RunState::Running;
        if let Err(e) = write_status(&ws, &status) {
            log::error!("run {}: {e}", status.id);
        }
        match run_pipeline(&cfg, &state.registry, &ws) {
            Ok(report) => {
                status.state = RunState::Succeeded;
                status.report = Some(report);
            }
            Err(e) => {
                status.state = RunState::Failed;
                status.report = e.partial_report().cloned();
                status.error = Some(ServiceError::Pipeline(e).to_json());
            }
        }
        if let Err(e) = write_status(&ws, &status) {
            log::error!("run {}: {e}", status.id);
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({"run_id": run_id}))).into_response())
}

fn run_dir(dir: &Path, id: &str) -> ApiResult<PathBuf> {
    check_id(id)?;
    let ws = dir.join(RUNS_DIR).join(id);
    if !ws.join(STATUS_FILE).is_file() {
        return Err(ServiceError::NotFound(format!("run `{id}`")));
    }
    Ok(ws)
}

async fn run_status(State(s): Shared, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let ws = run_dir(&s.dir, &id)?;
    let bytes = std::fs::read(ws.join(STATUS_FILE))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

#[derive(Deserialize)]
struct ArtifactQuery {
    suffix: Option<String>,
}

async fn run_artifact(
    State(s): Shared,
    UrlPath((id, stage)): UrlPath<(String, usize)>,
    Query(q): Query<ArtifactQuery>,
) -> ApiResult<Response> {
    let ws = run_dir(&s.dir, &id)?;
    let status: Value = serde_json::from_slice(&std::fs::read(ws.join(STATUS_FILE))?)
        .map_err(|e| ServiceError::Corrupt(e.to_string()))?;
    let stage_id = status["report"]["stages"]
        .as_array()
        .and_then(|st| st.iter().find(|r| r["index"] == json!(stage)))
        .and_then(|r| r["id"].as_str())
        .ok_or_else(|| ServiceError::NotFound(format!("stage {stage} of run `{id}`")))?;
    let name = match &q.suffix {
        None => stage_artifact_name(stage, stage_id),
        Some(sfx) if !sfx.is_empty() && !sfx.contains(['/', '\\']) && !sfx.contains("..") => {
            format!("stage_{stage}_{stage_id}.{sfx}")
        }
        Some(sfx) => return Err(ServiceError::BadRequest(format!("bad suffix `{sfx}`"))),
    };
    let path = ws.join(&name);
    let bytes = std::fs::read(&path).map_err(|_| ServiceError::NotFound(format!("artifact `{name}`")))?;
    let mime = match path.extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("csv") => "text/csv",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], Body::from(bytes)).into_response())
}
