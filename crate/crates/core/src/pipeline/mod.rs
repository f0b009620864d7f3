//! Chainable processors: manifests and the registry, pipeline configuration
//! and validation, and the sequential execution engine.
//!
//! A pipeline is a chain `o = i(h(g(f(data))))`. Every stage declares the
//! kind of data it takes and produces, and consecutive kinds must agree.

mod config;
mod manifest;
mod run;
mod stats;
pub mod syntax;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{swap_stage, validate_pipeline, Diagnostic, PipelineConfig, StageConfig};
pub use manifest::{
    load_manifest, scan_registry, Category, DataKind, Exec, ParamSpec, ParamType, ParamValue, ProcessorManifest,
    Registry, MANIFEST_EXTENSION,
};
pub use run::{
    apply_processor, execute_pipeline, load_views, reconstruct_views, reproject_views, run_pipeline,
    stage_artifact_name, BoxError, FrameSource, RunReport, StageData, StageReport, TableData, View, REPORT_FILE,
};
pub use stats::{input_statistics, AxisRange, InputStatistics, PartStatistics};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: malformed manifest field `{field}`: {reason}", file.display())]
    MalformedManifest {
        file: PathBuf,
        field: String,
        reason: String,
    },
    #[error("malformed pipeline config at line {line}: {reason}")]
    MalformedConfig { line: usize, reason: String },
    #[error("pipeline is invalid: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("stage {stage} ({id}) failed: {message}")]
    StageFailure {
        stage: usize,
        id: String,
        message: String,
        report: Box<RunReport>,
    },
    #[error("stage {stage} ({id}): external process exited with {}: {stderr}", code.map_or("a signal".to_string(), |c| format!("code {c}")))]
    ExternalProcessError {
        stage: usize,
        id: String,
        code: Option<i32>,
        stderr: String,
        report: Box<RunReport>,
    },
    #[error("cannot place processor at stage {index}: {reason}")]
    KindMismatch { index: usize, reason: String },
    #[error("unknown processor `{0}`")]
    UnknownProcessor(String),
    #[error("sequence is empty")]
    EmptySequence,
    #[error("{0}")]
    Io(String),
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl PipelineError {
    /// The report of the stages that completed before a failure.
    pub fn partial_report(&self) -> Option<&RunReport> {
        match self {
            PipelineError::StageFailure { report, .. } | PipelineError::ExternalProcessError { report, .. } => {
                Some(report)
            }
            _ => None,
        }
    }
}
