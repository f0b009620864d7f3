//! Pose data model: a [`PoseSequence`] holds one [`Skeleton`] per frame, and
//! each skeleton holds one [`Part`] per named keypoint.
//!
//! A part is "valid" when its score reaches the sequence's
//! `score_threshold`. Invalid parts are stored with score 0 and zeroed
//! coordinates when they come from a missing cell in a file, but filters may
//! also lower scores on parts whose coordinates are kept.

mod io;

use std::collections::BTreeSet;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

pub use io::{read_pose, read_pose_file, translate_pose_file, write_pose, write_pose_file, PoseFormat};

/// Default validity threshold applied to part scores.
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.6;

/// Frame rate assumed for formats that carry no metadata row.
pub const DEFAULT_FPS: f64 = 30.0;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("unknown pose format `{0}`")]
    UnknownFormat(String),
    #[error("malformed header: offending column `{column}` ({reason})")]
    MalformedHeader { column: String, reason: String },
    #[error("row {row}: expected {expected} columns, found {found}")]
    InconsistentDims { row: usize, expected: usize, found: usize },
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    InvalidValue { row: usize, column: String, value: String },
    #[error("format `{0}` is read-only")]
    UnwritableFormat(PoseFormat),
    #[error("flat_csv supports 2 or 3 dimensions, sequence has {0}")]
    UnsupportedDims(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("invalid pose sequence: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = PoseError> = std::result::Result<T, E>;

/// One named keypoint: `D` coordinates plus a confidence score in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub name: String,
    pub coords: Vec<f64>,
    pub score: f64,
}

impl Part {
    pub fn new(name: impl Into<String>, coords: Vec<f64>, score: f64) -> Self {
        Self {
            name: name.into(),
            coords,
            score,
        }
    }

    /// A missing keypoint: zeroed coordinates and score 0.
    pub fn missing(name: impl Into<String>, dims: usize) -> Self {
        Self::new(name, vec![0.0; dims], 0.0)
    }

    pub fn dims(&self) -> usize {
        self.coords.len()
    }

    pub fn is_valid(&self, threshold: f64) -> bool {
        self.score >= threshold
    }

    /// Euclidean distance between the coordinates of two parts.
    pub fn distance(&self, other: &Part) -> Result<f64> {
        part_distance(self, other)
    }

    /// Same part with coordinates replaced.
    pub fn with_coords(&self, coords: Vec<f64>) -> Self {
        Self::new(self.name.clone(), coords, self.score)
    }

    pub fn with_score(&self, score: f64) -> Self {
        Self::new(self.name.clone(), self.coords.clone(), score)
    }

    fn zip_coords(&self, other: &Part, f: impl Fn(f64, f64) -> f64) -> Part {
        assert_eq!(self.dims(), other.dims(), "part arithmetic on mismatched dimensions");
        let coords = self.coords.iter().zip(&other.coords).map(|(&a, &b)| f(a, b)).collect();
        self.with_coords(coords)
    }
}

// Arithmetic acts on coordinates only; the left operand's name and score are kept.
impl Add for &Part {
    type Output = Part;
    fn add(self, rhs: &Part) -> Part {
        self.zip_coords(rhs, |a, b| a + b)
    }
}

impl Sub for &Part {
    type Output = Part;
    fn sub(self, rhs: &Part) -> Part {
        self.zip_coords(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &Part {
    type Output = Part;
    fn mul(self, k: f64) -> Part {
        self.with_coords(self.coords.iter().map(|c| c * k).collect())
    }
}

/// Euclidean norm of the coordinate difference of two parts.
pub fn part_distance(a: &Part, b: &Part) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(PoseError::DimMismatch(a.dims(), b.dims()));
    }
    Ok(a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// One frame's pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub frame_index: u64,
    /// Parts in the owning sequence's `part_order`.
    pub parts: Vec<Part>,
    pub behaviors: BTreeSet<String>,
}

impl Skeleton {
    pub fn new(frame_index: u64, parts: Vec<Part>) -> Self {
        Self {
            frame_index,
            parts,
            behaviors: BTreeSet::new(),
        }
    }

    pub fn part(&self, name: &str) -> Option<&Part> {
        self.parts.iter().find(|p| p.name == name)
    }

    pub fn part_mut(&mut self, name: &str) -> Option<&mut Part> {
        self.parts.iter_mut().find(|p| p.name == name)
    }

    pub fn with_behavior(mut self, behavior: impl Into<String>) -> Self {
        self.behaviors.insert(behavior.into());
        self
    }
}

/// Ordered per-frame poses sharing one part list and dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    part_order: Vec<String>,
    dims: usize,
    pub fps: f64,
    pub score_threshold: f64,
    skeletons: Vec<Skeleton>,
}

impl PoseSequence {
    pub fn new(part_order: Vec<String>, dims: usize) -> Result<Self> {
        if part_order.is_empty() {
            return Err(PoseError::Invariant("part_order is empty".into()));
        }
        if dims < 2 {
            return Err(PoseError::Invariant(format!("dims must be at least 2, got {dims}")));
        }
        let unique: BTreeSet<_> = part_order.iter().collect();
        if unique.len() != part_order.len() {
            return Err(PoseError::Invariant("duplicate part names".into()));
        }
        Ok(Self {
            part_order,
            dims,
            fps: DEFAULT_FPS,
            score_threshold: DEFAULT_SCORE_THRESHOLD,
            skeletons: Vec::new(),
        })
    }

    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = fps;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.score_threshold = threshold;
        self
    }

    /// Appends a skeleton after checking it against the sequence invariants.
    pub fn push(&mut self, skeleton: Skeleton) -> Result<()> {
        self.check_skeleton(&skeleton)?;
        if let Some(last) = self.skeletons.last() {
            if skeleton.frame_index <= last.frame_index {
                return Err(PoseError::Invariant(format!(
                    "frame index {} does not follow {}",
                    skeleton.frame_index, last.frame_index
                )));
            }
        }
        self.skeletons.push(skeleton);
        Ok(())
    }

    fn check_skeleton(&self, skeleton: &Skeleton) -> Result<()> {
        if skeleton.parts.len() != self.part_order.len()
            || skeleton
                .parts
                .iter()
                .zip(&self.part_order)
                .any(|(p, name)| &p.name != name)
        {
            return Err(PoseError::Invariant(format!(
                "frame {} does not cover the part order",
                skeleton.frame_index
            )));
        }
        for part in &skeleton.parts {
            if part.dims() != self.dims {
                return Err(PoseError::DimMismatch(part.dims(), self.dims));
            }
            if !(0.0..=1.0).contains(&part.score) {
                return Err(PoseError::Invariant(format!(
                    "score {} of `{}` outside [0, 1]",
                    part.score, part.name
                )));
            }
        }
        Ok(())
    }

    pub fn part_order(&self) -> &[String] {
        &self.part_order
    }

    pub fn part_index(&self, name: &str) -> Option<usize> {
        self.part_order.iter().position(|p| p == name)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn skeletons(&self) -> &[Skeleton] {
        &self.skeletons
    }

    pub fn len(&self) -> usize {
        self.skeletons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skeletons.is_empty()
    }

    /// Recording duration in seconds.
    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.fps
    }

    pub fn is_valid(&self, frame: usize, part: usize) -> bool {
        self.skeletons[frame].parts[part].is_valid(self.score_threshold)
    }

    /// The track of one part across all frames.
    pub fn track(&self, part: usize) -> impl Iterator<Item = &Part> + '_ {
        self.skeletons.iter().map(move |s| &s.parts[part])
    }

    /// Builds a sequence with the same metadata and frame indices where part
    /// `j` of frame `i` is `f(i, j, part)`.
    pub fn map_parts(&self, mut f: impl FnMut(usize, usize, &Part) -> Part) -> PoseSequence {
        let skeletons = self
            .skeletons
            .iter()
            .enumerate()
            .map(|(i, s)| Skeleton {
                frame_index: s.frame_index,
                behaviors: s.behaviors.clone(),
                parts: s.parts.iter().enumerate().map(|(j, p)| f(i, j, p)).collect(),
            })
            .collect();
        PoseSequence {
            skeletons,
            ..self.empty_like()
        }
    }

    /// Replaces the track of one part. `track.len()` must equal `self.len()`.
    pub fn set_track(&mut self, part: usize, track: Vec<Part>) {
        assert_eq!(track.len(), self.len());
        for (skel, p) in self.skeletons.iter_mut().zip(track) {
            skel.parts[part] = p;
        }
    }

    /// Same metadata and part order, no frames.
    pub fn empty_like(&self) -> PoseSequence {
        PoseSequence {
            part_order: self.part_order.clone(),
            dims: self.dims,
            fps: self.fps,
            score_threshold: self.score_threshold,
            skeletons: Vec::new(),
        }
    }

    /// Restriction of the sequence to a subset of parts.
    pub fn select_parts(&self, names: &[&str]) -> Result<PoseSequence> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.part_index(n)
                    .ok_or_else(|| PoseError::Invariant(format!("unknown part `{n}`")))
            })
            .collect::<Result<_>>()?;
        let mut out = PoseSequence::new(names.iter().map(|s| s.to_string()).collect(), self.dims)?
            .with_fps(self.fps)
            .with_threshold(self.score_threshold);
        out.skeletons = self
            .skeletons
            .iter()
            .map(|s| Skeleton {
                frame_index: s.frame_index,
                behaviors: s.behaviors.clone(),
                parts: idx.iter().map(|&j| s.parts[j].clone()).collect(),
            })
            .collect();
        Ok(out)
    }
}
