//! Behavioral analysis generators: gaze ray tracing, occupancy, rearing,
//! egocentric boundary rate maps and spike location tables.

mod arena;
mod gaze;
mod grid;

use std::io::Read;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::pose::{PoseSequence, Skeleton};

pub use arena::{
    detect_rearing, ebc_rate_map, occupancy_map, spike_location_data, Arena, EbcMaps, EbcParams, OccupancyMap,
    RearingEvent, RearingResult, SpikeLocation, SpikeLocations,
};
pub use gaze::{
    gaze_heatmap, load_walls, ray_wall_intersect, read_walls, Wall, WallHit, MIN_RAY_T, PARALLEL_EPS, WALL_COLUMNS,
};
pub use grid::{AnalysisGrid, GridUnits};

#[derive(Debug, Error)]
pub enum BehaviorError {
    #[error("unknown part `{0}`")]
    UnknownPart(String),
    #[error("view parts are not valid in frame {0}")]
    InvalidParts(u64),
    #[error("view parts coincide in frame {0}")]
    CoincidentParts(u64),
    #[error("no walls given")]
    NoWalls,
    #[error("invalid wall `{name}`: {reason}")]
    InvalidWall { name: String, reason: String },
    #[error("arena bounds are degenerate")]
    DegenerateArena,
    #[error("analysis needs 3D poses, got {0}D")]
    NotThreeD(usize),
    #[error("bad bins: {0}")]
    BadBins(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid spike train: {0}")]
    InvalidSpikes(String),
    #[error("malformed grid: {0}")]
    MalformedGrid(String),
    #[error("render failed: {0}")]
    Render(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = BehaviorError> = std::result::Result<T, E>;

/// Spike times of one cell, in seconds from the first pose frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub cell_id: String,
    times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(cell_id: impl Into<String>, times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(BehaviorError::InvalidSpikes(
                "times must be finite and non-negative".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(BehaviorError::InvalidSpikes("times must be nondecreasing".into()));
        }
        Ok(Self {
            cell_id: cell_id.into(),
            times,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Reads a single-column CSV of seconds. A non-numeric first line is
    /// taken as a header.
    pub fn read_csv<R: Read>(cell_id: impl Into<String>, input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut times = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let cell = rec.get(0).unwrap_or("").trim();
            if rec.len() != 1 {
                return Err(BehaviorError::InvalidSpikes(format!(
                    "line {} has {} columns",
                    i + 1,
                    rec.len()
                )));
            }
            match cell.parse::<f64>() {
                Ok(t) => times.push(t),
                Err(_) if i == 0 => continue,
                Err(_) => {
                    return Err(BehaviorError::InvalidSpikes(format!(
                        "line {}: `{cell}` is not a number",
                        i + 1
                    )))
                }
            }
        }
        Self::new(cell_id, times)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("cell").to_string();
        Self::read_csv(id, std::fs::File::open(path)?)
    }

    fn check_duration(&self, seq: &PoseSequence) -> Result<()> {
        let duration = seq.duration();
        match self.times.last() {
            Some(&t) if t > duration => Err(BehaviorError::InvalidSpikes(format!(
                "spike at {t} s is past the recording end {duration} s"
            ))),
            _ => Ok(()),
        }
    }
}

pub(crate) fn part_index(seq: &PoseSequence, name: &str) -> Result<usize> {
    seq.part_index(name)
        .ok_or_else(|| BehaviorError::UnknownPart(name.to_string()))
}

fn point3(coords: &[f64]) -> Point3<f64> {
    Point3::new(coords[0], coords[1], coords.get(2).copied().unwrap_or(0.0))
}

/// Origin at `tip` and unit direction from `base` to `tip`. 2D parts are
/// lifted to z = 0.
pub fn view_direction(skel: &Skeleton, base: &str, tip: &str, threshold: f64) -> Result<(Point3<f64>, Vector3<f64>)> {
    let b = skel
        .part(base)
        .ok_or_else(|| BehaviorError::UnknownPart(base.to_string()))?;
    let t = skel
        .part(tip)
        .ok_or_else(|| BehaviorError::UnknownPart(tip.to_string()))?;
    if !b.is_valid(threshold) || !t.is_valid(threshold) {
        return Err(BehaviorError::InvalidParts(skel.frame_index));
    }
    let (pb, pt) = (point3(&b.coords), point3(&t.coords));
    let d = pt - pb;
    let n = d.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(BehaviorError::CoincidentParts(skel.frame_index));
    }
    Ok((pt, d / n))
}
