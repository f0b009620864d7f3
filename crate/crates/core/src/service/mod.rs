//! Local HTTP service for the annotation and pipeline-composition UI, plus
//! the annotation store and project model it serves.
//!
//! A project is a directory holding `project.json`, `annotations.csv`,
//! pipeline configs under `pipelines/`, external processor manifests under
//! `processors/`, and run workspaces under `runs/`.

mod annotations;
mod http;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::BehaviorError;
use crate::frame_io::FrameError;
use crate::geometry::{CameraProfile, GeometryError};
use crate::pipeline::{Diagnostic, PipelineError};

pub use annotations::{
    interpolate_annotations, reprojection_assist, Annotation, AnnotationStore, Provenance, ReprojectionProposal,
    ANNOTATIONS_FILE,
};
pub use http::{router, serve, AppState, RunState, RunStatus};

pub const PROJECT_FILE: &str = "project.json";
pub const PIPELINES_DIR: &str = "pipelines";
pub const PROCESSORS_DIR: &str = "processors";
pub const RUNS_DIR: &str = "runs";
/// Extension of pipeline config files under `pipelines/`.
pub const PIPELINE_EXTENSION: &str = "pipeline";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("no annotated endpoints for {camera}/{part} at frames {frame_a} and {frame_b}")]
    MissingEndpoints {
        camera: String,
        part: String,
        frame_a: u64,
        frame_b: u64,
    },
    #[error("invalid project: {0}")]
    InvalidProject(String),
    #[error("corrupt project data: {0}")]
    Corrupt(String),
    #[error("pipeline is invalid")]
    InvalidPipeline(Vec<Diagnostic>),
    #[error("port {0} is in use")]
    PortInUse(u16),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Io(e.to_string())
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`, so readers see either the old or the new content.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| ServiceError::Io(e.error.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectCamera {
    pub name: String,
    /// Frame source, relative to the project dir unless absolute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<String>,
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<CameraProfile>,
}

fn default_backend() -> String {
    crate::frame_io::IMAGE_DIR_BACKEND.to_string()
}

impl ProjectCamera {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            frames: None,
            backend: default_backend(),
            profile: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Project {
    pub name: String,
    #[serde(default)]
    pub cameras: Vec<ProjectCamera>,
    #[serde(default)]
    pub part_order: Vec<String>,
    /// `[min_x, min_y, max_x, max_y]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arena: Option<[f64; 4]>,
    /// Wall table path, relative to the project dir unless absolute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walls: Option<String>,
}

impl Project {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.name.trim().is_empty() {
            return Err(ServiceError::InvalidProject("name is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.cameras {
            if c.name.is_empty() || !seen.insert(c.name.as_str()) {
                return Err(ServiceError::InvalidProject(format!(
                    "camera name `{}` is empty or repeated",
                    c.name
                )));
            }
        }
        let mut parts = BTreeSet::new();
        if let Some(p) = self.part_order.iter().find(|p| !parts.insert(p.as_str())) {
            return Err(ServiceError::InvalidProject(format!("part `{p}` is repeated")));
        }
        Ok(())
    }

    pub fn camera_names(&self) -> Vec<String> {
        self.cameras.iter().map(|c| c.name.clone()).collect()
    }

    /// Profiles of the calibrated cameras, in project order.
    pub fn calibrated(&self) -> Vec<CameraProfile> {
        self.cameras
            .iter()
            .filter_map(|c| {
                c.profile.clone().map(|p| CameraProfile {
                    name: c.name.clone(),
                    ..p
                })
            })
            .collect()
    }

    pub fn load(dir: &Path) -> Result<Self, ServiceError> {
        let path = dir.join(PROJECT_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| ServiceError::InvalidProject(format!("{}: {e}", path.display())))?;
        let p: Project =
            serde_json::from_str(&text).map_err(|e| ServiceError::Corrupt(format!("{}: {e}", path.display())))?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, ServiceError> {
        self.validate()?;
        let path = dir.join(PROJECT_FILE);
        let json = serde_json::to_string_pretty(self).expect("project serializes");
        atomic_write(&path, json.as_bytes())?;
        Ok(path)
    }
}
