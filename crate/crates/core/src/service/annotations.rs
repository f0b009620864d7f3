use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use super::{atomic_write, ServiceError};
use crate::geometry::{dlt_project, dlt_reconstruct, CameraAnnotations, CameraProfile, Observation};

/// File holding the annotation store inside a project directory.
pub const ANNOTATIONS_FILE: &str = "annotations.csv";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Annotated,
    Interpolated,
    Projected,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Annotated => "annotated",
            Provenance::Interpolated => "interpolated",
            Provenance::Projected => "projected",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "annotated" => Ok(Provenance::Annotated),
            "interpolated" => Ok(Provenance::Interpolated),
            "projected" => Ok(Provenance::Projected),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

/// One stored point. `residual` is the triangulation residual (pixels) for
/// projected points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub camera: String,
    pub frame: u64,
    pub part: String,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl Annotation {
    pub fn annotated(camera: impl Into<String>, frame: u64, part: impl Into<String>, x: f64, y: f64) -> Self {
        Self {
            camera: camera.into(),
            frame,
            part: part.into(),
            x,
            y,
            provenance: Provenance::Annotated,
            residual: None,
        }
    }

    fn key(&self) -> Key {
        (self.camera.clone(), self.frame, self.part.clone())
    }
}

type Key = (String, u64, String);

const COLUMNS: [&str; 7] = ["camera", "frame", "part", "x", "y", "provenance", "residual"];

/// 2D points keyed by (camera, frame, part), at most one per key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationStore {
    points: BTreeMap<Key, Annotation>,
}

impl AnnotationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, camera: &str, frame: u64, part: &str) -> Option<&Annotation> {
        self.points.get(&(camera.to_string(), frame, part.to_string()))
    }

    /// Inserts or replaces the point at the annotation's key.
    pub fn upsert(&mut self, a: Annotation) -> Result<(), ServiceError> {
        if !a.x.is_finite() || !a.y.is_finite() {
            return Err(ServiceError::BadRequest(format!(
                "non-finite point for {}/{}/{}",
                a.camera, a.frame, a.part
            )));
        }
        if a.camera.is_empty() || a.part.is_empty() {
            return Err(ServiceError::BadRequest("camera and part must be non-empty".into()));
        }
        self.points.insert(a.key(), a);
        Ok(())
    }

    pub fn remove(&mut self, camera: &str, frame: u64, part: &str) -> Option<Annotation> {
        self.points.remove(&(camera.to_string(), frame, part.to_string()))
    }

    /// Points in key order, optionally restricted to a camera and/or frame.
    pub fn query(&self, camera: Option<&str>, frame: Option<u64>) -> Vec<Annotation> {
        self.points
            .values()
            .filter(|a| camera.is_none_or(|c| a.camera == c) && frame.is_none_or(|f| a.frame == f))
            .cloned()
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Annotation> {
        self.points.values()
    }

    /// Only `annotated` points, grouped per camera in `cameras` order.
    pub fn camera_annotations(&self, cameras: &[String]) -> Vec<CameraAnnotations> {
        cameras
            .iter()
            .map(|cam| {
                let mut c = CameraAnnotations::new(cam.clone());
                for a in self.points.values() {
                    if &a.camera == cam && a.provenance == Provenance::Annotated {
                        c.insert(a.frame, a.part.clone(), Point2::new(a.x, a.y));
                    }
                }
                c
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COLUMNS)?;
        for a in self.points.values() {
            w.write_record([
                a.camera.clone(),
                a.frame.to_string(),
                a.part.clone(),
                a.x.to_string(),
                a.y.to_string(),
                a.provenance.to_string(),
                a.residual.map_or_else(String::new, |r| r.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, ServiceError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        if header.iter().ne(COLUMNS) {
            return Err(ServiceError::Corrupt(format!(
                "annotation header must be {}",
                COLUMNS.join(",")
            )));
        }
        let mut store = Self::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| ServiceError::Corrupt(e.to_string()))?;
            let bad = |what: &str| ServiceError::Corrupt(format!("row {}: bad {what}", i + 1));
            let a = Annotation {
                camera: rec[0].to_string(),
                frame: rec[1].parse().map_err(|_| bad("frame"))?,
                part: rec[2].to_string(),
                x: rec[3].parse().map_err(|_| bad("x"))?,
                y: rec[4].parse().map_err(|_| bad("y"))?,
                provenance: rec[5].parse().map_err(|_| bad("provenance"))?,
                residual: match &rec[6] {
                    "" => None,
                    s => Some(s.parse().map_err(|_| bad("residual"))?),
                },
            };
            if store.points.insert(a.key(), a).is_some() {
                return Err(bad("key (duplicate)"));
            }
        }
        Ok(store)
    }

    /// Loads `annotations.csv` from `dir`; a missing file is an empty store.
    pub fn load(dir: &Path) -> Result<Self, ServiceError> {
        let path = dir.join(ANNOTATIONS_FILE);
        match std::fs::File::open(&path) {
            Ok(f) => Self::read_csv(f),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(ServiceError::Io(format!("{}: {e}", path.display()))),
        }
    }

    /// Replaces `annotations.csv` in `dir` by write-temp-rename.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, ServiceError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| ServiceError::Io(e.to_string()))?;
        let path = dir.join(ANNOTATIONS_FILE);
        atomic_write(&path, &buf)?;
        Ok(path)
    }
}

/// Fills frames strictly between `frame_a` and `frame_b` on the segment
/// joining the two endpoint points. Annotated points are never replaced.
/// Returns the number of points written.
pub fn interpolate_annotations(
    store: &mut AnnotationStore,
    camera: &str,
    part: &str,
    frame_a: u64,
    frame_b: u64,
) -> Result<usize, ServiceError> {
    if frame_a >= frame_b {
        return Err(ServiceError::BadRequest(format!(
            "frame_a ({frame_a}) must be below frame_b ({frame_b})"
        )));
    }
    let endpoint = |f: u64| {
        store
            .get(camera, f, part)
            .filter(|a| a.provenance == Provenance::Annotated)
            .map(|a| (a.x, a.y))
    };
    let (Some((xa, ya)), Some((xb, yb))) = (endpoint(frame_a), endpoint(frame_b)) else {
        return Err(ServiceError::MissingEndpoints {
            camera: camera.to_string(),
            part: part.to_string(),
            frame_a,
            frame_b,
        });
    };
    let span = (frame_b - frame_a) as f64;
    let mut written = 0;
    for f in frame_a + 1..frame_b {
        if store
            .get(camera, f, part)
            .is_some_and(|a| a.provenance == Provenance::Annotated)
        {
            continue;
        }
        let t = (f - frame_a) as f64 / span;
        store.upsert(Annotation {
            camera: camera.to_string(),
            frame: f,
            part: part.to_string(),
            x: xa + t * (xb - xa),
            y: ya + t * (yb - ya),
            provenance: Provenance::Interpolated,
            residual: None,
        })?;
        written += 1;
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReprojectionProposal {
    pub point3: [f64; 3],
    pub residual: f64,
    /// Cameras whose annotated points were triangulated.
    pub sources: Vec<String>,
    /// One `projected` point per remaining calibrated camera.
    pub proposals: Vec<Annotation>,
}

/// Triangulates (frame, part) from the cameras where it is annotated and
/// projects it into every other camera in `cams`.
pub fn reprojection_assist(
    store: &AnnotationStore,
    cams: &[CameraProfile],
    frame: u64,
    part: &str,
) -> Result<ReprojectionProposal, ServiceError> {
    let mut obs = Vec::new();
    let mut sources = Vec::new();
    for (i, cam) in cams.iter().enumerate() {
        if let Some(a) = store
            .get(&cam.name, frame, part)
            .filter(|a| a.provenance == Provenance::Annotated)
        {
            obs.push(Observation::new(i, Point2::new(a.x, a.y), 1.0));
            sources.push(cam.name.clone());
        }
    }
    let r = dlt_reconstruct(cams, &obs, 0.0)?;
    let point3 = Point3::from(r.point.coords);
    let mut proposals = Vec::new();
    for cam in cams.iter().filter(|c| !sources.contains(&c.name)) {
        let uv = dlt_project(cam, &point3)?;
        proposals.push(Annotation {
            camera: cam.name.clone(),
            frame,
            part: part.to_string(),
            x: uv.x,
            y: uv.y,
            provenance: Provenance::Projected,
            residual: Some(r.rms_residual),
        });
    }
    Ok(ReprojectionProposal {
        point3: [r.point.x, r.point.y, r.point.z],
        residual: r.rms_residual,
        sources,
        proposals,
    })
}
