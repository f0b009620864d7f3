use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::syntax::{placeholders, write_entry, Document, Entry};
use super::PipelineError;

/// File extension of processor manifests found by [`scan_registry`].
pub const MANIFEST_EXTENSION: &str = "processor";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Filter,
    Generative,
    Utility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Pose2d,
    Pose3d,
    Frames,
    Table,
    None,
}

macro_rules! text_enum {
    ($ty:ident { $($var:ident => $text:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$var => $text),* })
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($ty::$var),)*
                    other => Err(format!("unknown value `{other}`")),
                }
            }
        }
    };
}

text_enum!(Category { Filter => "filter", Generative => "generative", Utility => "utility" });
text_enum!(DataKind {
    Pose2d => "pose2d",
    Pose3d => "pose3d",
    Frames => "frames",
    Table => "table",
    None => "none",
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "variants", rename_all = "lowercase")]
pub enum ParamType {
    Int,
    Real,
    String,
    Path,
    Bool,
    Enum(Vec<String>),
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamType::Int => f.write_str("int"),
            ParamType::Real => f.write_str("real"),
            ParamType::String => f.write_str("string"),
            ParamType::Path => f.write_str("path"),
            ParamType::Bool => f.write_str("bool"),
            ParamType::Enum(v) => write!(f, "enum:{}", v.join("|")),
        }
    }
}

impl FromStr for ParamType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "int" => ParamType::Int,
            "real" => ParamType::Real,
            "string" => ParamType::String,
            "path" => ParamType::Path,
            "bool" => ParamType::Bool,
            other => {
                let variants = other
                    .strip_prefix("enum:")
                    .ok_or_else(|| format!("unknown type `{other}`"))?;
                let v: Vec<String> = variants.split('|').map(|s| s.trim().to_string()).collect();
                if v.iter().any(String::is_empty) || v.iter().collect::<BTreeSet<_>>().len() != v.len() {
                    return Err("enum variants must be distinct and nonempty".into());
                }
                ParamType::Enum(v)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl ParamType {
    pub fn parse(&self, raw: &str) -> Result<ParamValue, String> {
        match self {
            ParamType::Int => raw
                .parse()
                .map(ParamValue::Int)
                .map_err(|_| format!("`{raw}` is not an integer")),
            ParamType::Real => match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(ParamValue::Real(v)),
                _ => Err(format!("`{raw}` is not a finite real")),
            },
            ParamType::Bool => match raw {
                "true" => Ok(ParamValue::Bool(true)),
                "false" => Ok(ParamValue::Bool(false)),
                _ => Err(format!("`{raw}` is not true or false")),
            },
            ParamType::String | ParamType::Path => Ok(ParamValue::Text(raw.to_string())),
            ParamType::Enum(v) => {
                if v.iter().any(|x| x == raw) {
                    Ok(ParamValue::Text(raw.to_string()))
                } else {
                    Err(format!("`{raw}` is not one of {}", v.join(", ")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    pub default: Option<String>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Exec {
    Builtin(String),
    External(String),
}

impl fmt::Display for Exec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exec::Builtin(op) => write!(f, "builtin:{op}"),
            Exec::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessorManifest {
    pub id: String,
    pub category: Category,
    pub input_kind: DataKind,
    pub output_kind: DataKind,
    pub params: Vec<ParamSpec>,
    pub exec: Exec,
}

impl ProcessorManifest {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Parses manifest text. Errors name the offending field.
    pub fn parse(text: &str) -> Result<Self, (String, String)> {
        let doc = Document::parse(text).map_err(|e| ("syntax".to_string(), e.to_string()))?;
        let field = |name: &str| -> Result<&Entry, (String, String)> {
            doc.top
                .iter()
                .find(|e| e.key == name)
                .ok_or_else(|| (name.to_string(), "missing".to_string()))
        };
        let parsed = |name: &str| -> Result<String, (String, String)> { Ok(field(name)?.value.clone()) };
        let known = ["id", "category", "input_kind", "output_kind", "exec"];
        if let Some(e) = doc.top.iter().find(|e| !known.contains(&e.key.as_str())) {
            return Err((e.key.clone(), "unknown field".into()));
        }
        let id = parsed("id")?;
        if id.trim().is_empty() || id.chars().any(char::is_whitespace) {
            return Err(("id".into(), "must be nonempty without whitespace".into()));
        }
        let category = parsed("category")?.parse().map_err(|e| ("category".to_string(), e))?;
        let input_kind = parsed("input_kind")?
            .parse()
            .map_err(|e| ("input_kind".to_string(), e))?;
        let output_kind = parsed("output_kind")?
            .parse()
            .map_err(|e| ("output_kind".to_string(), e))?;
        let exec_raw = parsed("exec")?;
        let exec = if let Some(op) = exec_raw.strip_prefix("builtin:") {
            Exec::Builtin(op.to_string())
        } else if let Some(cmd) = exec_raw.strip_prefix("external:") {
            Exec::External(cmd.to_string())
        } else {
            return Err(("exec".into(), "must start with builtin: or external:".into()));
        };
        let mut params = Vec::new();
        for section in &doc.sections {
            if section.name != "param" {
                return Err((format!("[{}]", section.name), "unknown section".into()));
            }
            let get = |k: &str| section.entries.iter().find(|e| e.key == k).map(|e| e.value.clone());
            let where_ = |k: &str| format!("param@{}.{k}", section.line);
            if let Some(e) = section
                .entries
                .iter()
                .find(|e| !["name", "type", "required", "default", "label"].contains(&e.key.as_str()))
            {
                return Err((where_(&e.key), "unknown field".into()));
            }
            let name = get("name").ok_or_else(|| (where_("name"), "missing".into()))?;
            let ty: ParamType = get("type")
                .ok_or_else(|| (where_("type"), "missing".into()))?
                .parse()
                .map_err(|e| (where_("type"), e))?;
            let required = match get("required").as_deref() {
                None | Some("false") => false,
                Some("true") => true,
                Some(other) => return Err((where_("required"), format!("`{other}` is not a bool"))),
            };
            let label = get("label").unwrap_or_else(|| name.clone());
            params.push(ParamSpec {
                name,
                ty,
                required,
                default: get("default"),
                label,
            });
        }
        let m = ProcessorManifest {
            id,
            category,
            input_kind,
            output_kind,
            params,
            exec,
        };
        m.check()?;
        Ok(m)
    }

    /// Checks the manifest invariants.
    pub fn check(&self) -> Result<(), (String, String)> {
        let mut seen = BTreeSet::new();
        for p in &self.params {
            let field = format!("param.{}", p.name);
            if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err((field, "names are letters, digits and `_`".into()));
            }
            if matches!(p.name.as_str(), "input" | "output" | "id") {
                return Err((field, "name is reserved".into()));
            }
            if !seen.insert(p.name.as_str()) {
                return Err((field, "duplicate parameter".into()));
            }
            match (&p.default, p.required) {
                (Some(_), true) => return Err((field, "required parameters take no default".into())),
                (Some(d), false) => {
                    p.ty.parse(d).map_err(|e| (field.clone(), format!("default: {e}")))?;
                }
                _ => {}
            }
        }
        if let Exec::External(cmd) = &self.exec {
            let names = placeholders(cmd).map_err(|e| ("exec".to_string(), e))?;
            for n in names {
                if n != "input" && n != "output" && !seen.contains(n.as_str()) {
                    return Err(("exec".into(), format!("template references undeclared `{{{n}}}`")));
                }
            }
        }
        Ok(())
    }

    /// Manifest text that [`parse`](Self::parse) reads back unchanged.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        write_entry(&mut out, "id", &self.id);
        write_entry(&mut out, "category", &self.category.to_string());
        write_entry(&mut out, "input_kind", &self.input_kind.to_string());
        write_entry(&mut out, "output_kind", &self.output_kind.to_string());
        write_entry(&mut out, "exec", &self.exec.to_string());
        for p in &self.params {
            out.push_str("\n[param]\n");
            write_entry(&mut out, "name", &p.name);
            write_entry(&mut out, "type", &p.ty.to_string());
            out.push_str(if p.required {
                "required = true\n"
            } else {
                "required = false\n"
            });
            if let Some(d) = &p.default {
                write_entry(&mut out, "default", d);
            }
            write_entry(&mut out, "label", &p.label);
        }
        out
    }
}

/// Known processors, in registration order. Ids are unique.
#[derive(Debug, Clone, Serialize)]
pub struct Registry {
    manifests: Vec<ProcessorManifest>,
    pub warnings: Vec<String>,
}

impl Registry {
    pub fn builtin() -> Self {
        Self {
            manifests: builtin_manifests(),
            warnings: Vec::new(),
        }
    }

    pub fn manifests(&self) -> &[ProcessorManifest] {
        &self.manifests
    }

    pub fn get(&self, id: &str) -> Option<&ProcessorManifest> {
        self.manifests.iter().find(|m| m.id == id)
    }

    /// Adds `m` unless its id is taken; returns whether it was added.
    pub fn insert(&mut self, m: ProcessorManifest, origin: &str) -> bool {
        if self.get(&m.id).is_some() {
            let w = format!("{origin}: duplicate processor id `{}` ignored", m.id);
            log::warn!("{w}");
            self.warnings.push(w);
            return false;
        }
        self.manifests.push(m);
        true
    }
}

/// Built-in processors plus every `*.processor` file directly inside `dirs`,
/// visited in the given directory order and by file name within each.
pub fn scan_registry(dirs: &[PathBuf]) -> Result<Registry, PipelineError> {
    let mut reg = Registry::builtin();
    for dir in dirs {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == MANIFEST_EXTENSION))
            .collect();
        files.sort();
        for file in files {
            let m = load_manifest(&file)?;
            reg.insert(m, &file.display().to_string());
        }
    }
    Ok(reg)
}

pub fn load_manifest(path: &Path) -> Result<ProcessorManifest, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    ProcessorManifest::parse(&text).map_err(|(field, reason)| PipelineError::MalformedManifest {
        file: path.to_path_buf(),
        field,
        reason,
    })
}

/// Builtin parameter: name, type, default, label. A label ending in `?`
/// marks an optional parameter without a default.
struct P(&'static str, &'static str, Option<&'static str>, &'static str);

fn manifest(
    id: &str,
    category: Category,
    input_kind: DataKind,
    output_kind: DataKind,
    params: &[P],
) -> ProcessorManifest {
    ProcessorManifest {
        id: id.to_string(),
        category,
        input_kind,
        output_kind,
        params: params
            .iter()
            .map(|P(name, ty, default, label)| ParamSpec {
                name: name.to_string(),
                ty: ty.parse().expect("builtin type"),
                required: default.is_none() && !label.ends_with('?'),
                default: default.map(str::to_string),
                label: label.trim_end_matches('?').to_string(),
            })
            .collect(),
        exec: Exec::Builtin(id.to_string()),
    }
}

fn builtin_manifests() -> Vec<ProcessorManifest> {
    use Category::*;
    use DataKind::*;
    let formats_in = "enum:cvkit|flat_csv|dlc_csv";
    let formats_out = "enum:cvkit|flat_csv";
    let filters: [(&str, Vec<P>); 5] = [
        (
            "kalman",
            vec![
                P("process_noise", "real", Some("0.01"), "Process noise q"),
                P("measurement_noise", "real", Some("1"), "Measurement noise r"),
                P("initial_variance", "real", Some("100"), "Initial variance"),
            ],
        ),
        (
            "linear_interpolate",
            vec![P("max_gap", "int", Some("10"), "Longest gap to fill (frames)")],
        ),
        (
            "moving_average",
            vec![P("window", "int", Some("5"), "Window (odd, frames)")],
        ),
        (
            "velocity_filter",
            vec![P("max_speed", "real", Option::None, "Max speed (units/frame)")],
        ),
        (
            "statistical_distance_filter",
            vec![
                P("window", "int", Some("5"), "Window (frames)"),
                P("z_max", "real", Option::None, "Max distance in scatter units"),
            ],
        ),
    ];
    let arena = P("arena", "string", Option::None, "Arena min_x,min_y,max_x,max_y (mm)");
    let mut out = vec![
        manifest(
            "loader",
            Utility,
            None,
            Pose3d,
            &[
                P("path", "path", Option::None, "Pose file"),
                P("format", formats_in, Some("cvkit"), "Format"),
            ],
        ),
        manifest(
            "loader2d",
            Utility,
            None,
            Pose2d,
            &[
                P(
                    "path",
                    "path",
                    Option::None,
                    "Pose file or directory of per-camera files",
                ),
                P("format", formats_in, Some("cvkit"), "Format"),
            ],
        ),
        manifest(
            "saver",
            Utility,
            Pose3d,
            None,
            &[
                P("path", "path", Option::None, "Output file"),
                P("format", formats_out, Some("cvkit"), "Format"),
            ],
        ),
        manifest(
            "saver2d",
            Utility,
            Pose2d,
            None,
            &[
                P("path", "path", Option::None, "Output directory"),
                P("format", formats_out, Some("cvkit"), "Format"),
            ],
        ),
        manifest(
            "table_saver",
            Utility,
            Table,
            None,
            &[P("path", "path", Option::None, "Output file")],
        ),
        manifest("statistics", Utility, Pose3d, Table, &[]),
        manifest("statistics_2d", Utility, Pose2d, Table, &[]),
        manifest(
            "frame_loader",
            Utility,
            None,
            Frames,
            &[
                P("path", "path", Option::None, "Frame source"),
                P("backend", "string", Some("image-dir"), "Decode backend"),
                P("buffer_capacity", "int", Some("64"), "Buffer capacity (frames)"),
            ],
        ),
        manifest("frame_summary", Utility, Frames, Table, &[]),
        manifest(
            "align_axes",
            Utility,
            Pose3d,
            Pose3d,
            &[
                P("origin", "string", Option::None, "Origin part"),
                P("x_axis", "string", Option::None, "Part on +X"),
                P("xy_plane", "string", Option::None, "Part in the XY plane"),
            ],
        ),
        manifest(
            "reconstruct",
            Generative,
            Pose2d,
            Pose3d,
            &[
                P("dlt", "path", Option::None, "DLT coefficient CSV"),
                P("cameras", "string", Option::None, "Camera names in DLT column order?"),
            ],
        ),
        manifest(
            "reproject",
            Generative,
            Pose3d,
            Pose2d,
            &[
                P("dlt", "path", Option::None, "DLT coefficient CSV"),
                P("cameras", "string", Option::None, "Camera names in DLT column order?"),
            ],
        ),
        manifest(
            "occupancy_map",
            Generative,
            Pose3d,
            Table,
            &[
                P("anchor", "string", Option::None, "Anchor part"),
                P(arena.0, arena.1, arena.2, arena.3),
                P("bins_x", "int", Some("20"), "Bins along x"),
                P("bins_y", "int", Some("20"), "Bins along y"),
            ],
        ),
        manifest(
            "gaze_heatmap",
            Generative,
            Pose3d,
            Table,
            &[
                P("walls", "path", Option::None, "Wall definitions CSV"),
                P("base", "string", Option::None, "View base part"),
                P("tip", "string", Option::None, "View tip part"),
                P("sigma", "real", Option::None, "Attention sigma (mm)"),
            ],
        ),
        manifest(
            "rearing",
            Generative,
            Pose3d,
            Table,
            &[
                P("anchor", "string", Option::None, "Anchor part"),
                P("z_min", "real", Option::None, "Minimum height (mm)"),
                P("min_frames", "int", Some("5"), "Minimum event length (frames)"),
                P(arena.0, arena.1, arena.2, arena.3),
                P("bins_x", "int", Some("20"), "Bins along x"),
                P("bins_y", "int", Some("20"), "Bins along y"),
            ],
        ),
        manifest(
            "ebc_rate_map",
            Generative,
            Pose3d,
            Table,
            &[
                P("spikes", "path", Option::None, "Spike times CSV"),
                P("anchor", "string", Option::None, "Anchor part"),
                P("base", "string", Option::None, "Head base part"),
                P("tip", "string", Option::None, "Head tip part"),
                P(arena.0, arena.1, arena.2, arena.3),
                P("max_dist", "real", Option::None, "Max boundary distance (mm)"),
                P("angle_bins", "int", Some("120"), "Angle bins"),
                P(
                    "dist_bins",
                    "int",
                    Option::None,
                    "Distance bins (default max_dist/12.5)?",
                ),
                P("min_occupancy_s", "real", Some("0.2"), "Min occupancy (s)"),
            ],
        ),
        manifest(
            "spike_locations",
            Generative,
            Pose3d,
            Table,
            &[
                P("spikes", "path", Option::None, "Spike times CSV"),
                P("anchor", "string", Option::None, "Anchor part"),
                P("base", "string", Option::None, "Head base part"),
                P("tip", "string", Option::None, "Head tip part"),
            ],
        ),
    ];
    for (id, params) in &filters {
        out.push(manifest(id, Filter, Pose3d, Pose3d, params));
        out.push(manifest(&format!("{id}_2d"), Filter, Pose2d, Pose2d, params));
    }
    out
}
