use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{DataKind, ProcessorManifest, Registry};
use super::syntax::{write_entry, Document};
use super::PipelineError;

/// One stage: a processor id and its raw parameter bindings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageConfig {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

impl StageConfig {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.params.insert(key.into(), value.to_string());
        self
    }
}

/// A chain of stages. `source` binds the first stage's unbound `path`
/// parameter and `sink` the last stage's.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub name: String,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub sink: Option<String>,
    pub stages: Vec<StageConfig>,
    /// Relative paths in bindings resolve against this directory.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(name: impl Into<String>, stages: Vec<StageConfig>) -> Self {
        Self {
            name: name.into(),
            source: None,
            sink: None,
            stages,
            base_dir: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let malformed = |line: usize, reason: String| PipelineError::MalformedConfig { line, reason };
        let doc = Document::parse(text).map_err(|e| malformed(e.line, e.reason))?;
        let mut name = None;
        let mut source = None;
        let mut sink = None;
        for e in &doc.top {
            match e.key.as_str() {
                "name" => name = Some(e.value.clone()),
                "source" => source = Some(e.value.clone()),
                "sink" => sink = Some(e.value.clone()),
                other => return Err(malformed(e.line, format!("unknown key `{other}`"))),
            }
        }
        let mut stages = Vec::new();
        for s in &doc.sections {
            if s.name != "stage" {
                return Err(malformed(s.line, format!("unknown section `[{}]`", s.name)));
            }
            let mut id = None;
            let mut params = BTreeMap::new();
            for e in &s.entries {
                if e.key == "id" {
                    id = Some(e.value.clone());
                } else {
                    params.insert(e.key.clone(), e.value.clone());
                }
            }
            let id = id.ok_or_else(|| malformed(s.line, "stage without `id`".into()))?;
            stages.push(StageConfig { id, params });
        }
        Ok(Self {
            name: name.ok_or_else(|| malformed(1, "missing `name`".into()))?,
            source,
            sink,
            stages,
            base_dir: None,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        write_entry(&mut out, "name", &self.name);
        if let Some(s) = &self.source {
            write_entry(&mut out, "source", s);
        }
        if let Some(s) = &self.sink {
            write_entry(&mut out, "sink", s);
        }
        for stage in &self.stages {
            out.push_str("\n[stage]\n");
            write_entry(&mut out, "id", &stage.id);
            for (k, v) in &stage.params {
                write_entry(&mut out, k, v);
            }
        }
        out
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Bindings for stage `index`: explicit values, then `source`/`sink`,
    /// then manifest defaults.
    pub fn bound_params(&self, index: usize, m: &ProcessorManifest) -> BTreeMap<String, String> {
        let mut out = self.stages[index].params.clone();
        if m.param("path").is_some() && !out.contains_key("path") {
            let implicit = if index == 0 && m.input_kind == DataKind::None {
                self.source.clone()
            } else if index + 1 == self.stages.len() && m.output_kind == DataKind::None {
                self.sink.clone()
            } else {
                None
            };
            if let Some(p) = implicit {
                out.insert("path".into(), p);
            }
        }
        for p in &m.params {
            if let (false, Some(d)) = (out.contains_key(&p.name), &p.default) {
                out.insert(p.name.clone(), d.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Stage index, or `None` for pipeline-level problems.
    pub stage: Option<usize>,
    pub reason: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(i) => write!(f, "stage {i}: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

/// Checks processor ids, the kind chain, and parameter bindings. An empty
/// result means the pipeline is valid.
pub fn validate_pipeline(cfg: &PipelineConfig, registry: &Registry) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |stage: Option<usize>, reason: String| out.push(Diagnostic { stage, reason });
    if cfg.stages.is_empty() {
        diag(None, "pipeline has no stages".into());
    }
    let mut prev: Option<DataKind> = Some(DataKind::None);
    for (i, stage) in cfg.stages.iter().enumerate() {
        let Some(m) = registry.get(&stage.id) else {
            diag(Some(i), format!("unknown processor `{}`", stage.id));
            prev = None;
            continue;
        };
        if let Some(expected) = prev {
            if m.input_kind != expected {
                if i == 0 {
                    diag(
                        Some(i),
                        format!(
                            "`{}` takes {} input but the first stage must take none",
                            m.id, m.input_kind
                        ),
                    );
                } else {
                    diag(
                        Some(i),
                        format!(
                            "kind mismatch: `{}` takes {} but the previous stage produces {}",
                            m.id, m.input_kind, expected
                        ),
                    );
                }
            }
        }
        prev = Some(m.output_kind);
        for reason in check_params(m, &stage.params, &cfg.bound_params(i, m)) {
            diag(Some(i), reason);
        }
    }
    out
}

/// Unknown explicit keys, unbound required parameters and values that do
/// not parse as the declared type.
pub(crate) fn check_params(
    m: &ProcessorManifest,
    explicit: &BTreeMap<String, String>,
    bound: &BTreeMap<String, String>,
) -> Vec<String> {
    let mut out = Vec::new();
    for key in explicit.keys() {
        if m.param(key).is_none() {
            out.push(format!("`{}` has no parameter `{key}`", m.id));
        }
    }
    for p in &m.params {
        match bound.get(&p.name) {
            None if p.required => out.push(format!("required parameter `{}` is not bound", p.name)),
            None => {}
            Some(v) => {
                if let Err(e) = p.ty.parse(v) {
                    out.push(format!("parameter `{}`: {e}", p.name));
                }
            }
        }
    }
    out
}

/// Replaces stage `index` with `new_id`, keeping the kind chain intact.
pub fn swap_stage(
    cfg: &PipelineConfig,
    index: usize,
    new_id: &str,
    params: BTreeMap<String, String>,
    registry: &Registry,
) -> Result<PipelineConfig, PipelineError> {
    let mismatch = |reason: String| PipelineError::KindMismatch { index, reason };
    if index >= cfg.stages.len() {
        return Err(mismatch(format!(
            "no stage {index} in a {}-stage pipeline",
            cfg.stages.len()
        )));
    }
    let m = registry
        .get(new_id)
        .ok_or_else(|| PipelineError::UnknownProcessor(new_id.to_string()))?;
    let before = if index == 0 {
        Some(DataKind::None)
    } else {
        registry.get(&cfg.stages[index - 1].id).map(|p| p.output_kind)
    };
    if let Some(k) = before.filter(|k| *k != m.input_kind) {
        return Err(mismatch(format!("`{new_id}` takes {} but receives {k}", m.input_kind)));
    }
    if let Some(next) = cfg.stages.get(index + 1).and_then(|s| registry.get(&s.id)) {
        if next.input_kind != m.output_kind {
            return Err(mismatch(format!(
                "`{new_id}` produces {} but `{}` takes {}",
                m.output_kind, next.id, next.input_kind
            )));
        }
    }
    let mut out = cfg.clone();
    out.stages[index] = StageConfig {
        id: new_id.to_string(),
        params,
    };
    Ok(out)
}
