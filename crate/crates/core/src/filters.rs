//! Trajectory denoising filters.
//!
//! Every filter maps a [`PoseSequence`] to a new sequence of the same length,
//! part order, dimensionality and frame indices, and treats each part's track
//! independently of the others.

use nalgebra::{Matrix3, RowVector3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{Part, PoseSequence};

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("filter needs a non-empty sequence")]
    EmptySequence,
    #[error("moving average window must be odd, got {0}")]
    EvenWindow(usize),
    #[error("invalid filter parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = FilterError> = std::result::Result<T, E>;

/// Below this RMS scatter the statistical filter invalidates nothing.
pub const ZERO_SCATTER: f64 = 1e-12;

pub const DEFAULT_MAX_GAP: usize = 10;
pub const DEFAULT_WINDOW: usize = 5;

/// Noise settings of the constant-acceleration Kalman filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanParams {
    /// Scale of the discrete white-jerk process noise.
    pub process_noise: f64,
    /// Measurement variance of a score-1 observation, in squared coordinate units.
    pub measurement_noise: f64,
    /// Initial state variance.
    pub initial_variance: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            process_noise: 0.01,
            measurement_noise: 1.0,
            initial_variance: 100.0,
        }
    }
}

impl KalmanParams {
    pub fn new(process_noise: f64, measurement_noise: f64, initial_variance: f64) -> Result<Self> {
        let params = Self {
            process_noise,
            measurement_noise,
            initial_variance,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("process_noise", self.process_noise),
            ("measurement_noise", self.measurement_noise),
            ("initial_variance", self.initial_variance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FilterError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Applies `f` to each part's track and reassembles the sequence.
fn per_part(seq: &PoseSequence, mut f: impl FnMut(&[Part]) -> Vec<Part>) -> PoseSequence {
    let mut out = seq.clone();
    for j in 0..seq.part_order().len() {
        let track: Vec<Part> = seq.track(j).cloned().collect();
        out.set_track(j, f(&track));
    }
    out
}

/// Forward constant-acceleration Kalman filter run per part and per axis.
///
/// The state is (position, velocity, acceleration) with a one-frame step;
/// only position is observed, with variance `measurement_noise / score`.
/// Frames below the score threshold get a prediction-only step: their
/// coordinates become the predicted position and their score is raised to
/// `threshold * r / (r + P)`, where `P` is the largest prior position variance
/// across axes, so it always stays below the threshold. Frames before the
/// first valid observation of a part are left untouched.
pub fn kalman_filter(seq: &PoseSequence, params: &KalmanParams) -> Result<PoseSequence> {
    params.validate()?;
    if seq.is_empty() {
        return Err(FilterError::EmptySequence);
    }
    let threshold = seq.score_threshold;
    Ok(per_part(seq, |track| kalman_track(track, threshold, params)))
}

fn kalman_track(track: &[Part], threshold: f64, params: &KalmanParams) -> Vec<Part> {
    let mut out = track.to_vec();
    let Some(first) = track.iter().position(|p| p.is_valid(threshold)) else {
        return out;
    };
    let dims = track[first].dims();
    let transition = Matrix3::new(1.0, 1.0, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0);
    let q = params.process_noise
        * Matrix3::new(
            1.0 / 20.0,
            1.0 / 8.0,
            1.0 / 6.0,
            1.0 / 8.0,
            1.0 / 3.0,
            1.0 / 2.0,
            1.0 / 6.0,
            1.0 / 2.0,
            1.0,
        );
    let h = RowVector3::new(1.0, 0.0, 0.0);
    let r = params.measurement_noise;

    let mut states: Vec<Vector3<f64>> = track[first].coords.iter().map(|&z| Vector3::new(z, 0.0, 0.0)).collect();
    let mut covs = vec![Matrix3::identity() * params.initial_variance; dims];

    for (i, part) in track.iter().enumerate().skip(first) {
        if i > first {
            for (x, p) in states.iter_mut().zip(covs.iter_mut()) {
                *x = transition * *x;
                *p = transition * *p * transition.transpose() + q;
            }
        }
        if part.is_valid(threshold) {
            let r_eff = r / part.score;
            for ((x, p), &z) in states.iter_mut().zip(covs.iter_mut()).zip(&part.coords) {
                let s = (h * *p * h.transpose())[0] + r_eff;
                let gain = *p * h.transpose() / s;
                *x += gain * (z - (h * *x)[0]);
                *p = (Matrix3::identity() - gain * h) * *p;
            }
            out[i] = part.with_coords(states.iter().map(|x| x[0]).collect());
        } else {
            let prior_var = covs.iter().map(|p| p[(0, 0)]).fold(0.0, f64::max);
            let score = (threshold * r / (r + prior_var)).min(prev_below(threshold));
            out[i] = Part::new(part.name.clone(), states.iter().map(|x| x[0]).collect(), score.max(0.0));
        }
    }
    out
}

/// Largest float strictly below `x` (0 stays 0).
fn prev_below(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

/// Fills runs of at most `max_gap` invalid frames that have valid frames on
/// both sides. The `i`-th filled frame of a run of length `g` takes
/// `a + (b - a) * i / (g + 1)` and the mean of the two bounding scores.
pub fn linear_interpolate(seq: &PoseSequence, max_gap: usize) -> PoseSequence {
    let threshold = seq.score_threshold;
    per_part(seq, |track| {
        let mut out = track.to_vec();
        let valid: Vec<usize> = (0..track.len()).filter(|&i| track[i].is_valid(threshold)).collect();
        for pair in valid.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let gap = b - a - 1;
            if gap == 0 || gap > max_gap {
                continue;
            }
            let (pa, pb) = (&track[a], &track[b]);
            let score = 0.5 * (pa.score + pb.score);
            for (i, slot) in out.iter_mut().enumerate().take(b).skip(a + 1) {
                let t = (i - a) as f64 / (gap + 1) as f64;
                let coords = pa.coords.iter().zip(&pb.coords).map(|(x, y)| x + (y - x) * t).collect();
                *slot = Part::new(slot.name.clone(), coords, score);
            }
        }
        out
    })
}

/// Centered moving average over the valid frames of a `window`-wide
/// neighborhood. Frames without any valid frame in their window keep their
/// coordinates; scores are never changed.
pub fn moving_average(seq: &PoseSequence, window: usize) -> Result<PoseSequence> {
    if window.is_multiple_of(2) {
        return Err(FilterError::EvenWindow(window));
    }
    let half = window / 2;
    let threshold = seq.score_threshold;
    Ok(per_part(seq, |track| {
        let n = track.len();
        let mut out = track.to_vec();
        for (i, slot) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n.saturating_sub(1));
            let mut sum = vec![0.0; slot.dims()];
            let mut count = 0usize;
            for p in track[lo..=hi].iter().filter(|p| p.is_valid(threshold)) {
                for (s, c) in sum.iter_mut().zip(&p.coords) {
                    *s += c;
                }
                count += 1;
            }
            if count > 0 {
                slot.coords = sum.into_iter().map(|s| s / count as f64).collect();
            }
        }
        out
    }))
}

/// Invalidates (score 0, coordinates kept) every valid frame whose speed from
/// the last accepted frame exceeds `max_speed` units per frame. Speed uses the
/// difference of frame indices as elapsed time.
pub fn velocity_filter(seq: &PoseSequence, max_speed: f64) -> Result<PoseSequence> {
    if !(max_speed > 0.0) {
        return Err(FilterError::InvalidParameter(format!(
            "max_speed must be positive, got {max_speed}"
        )));
    }
    let threshold = seq.score_threshold;
    let frames: Vec<u64> = seq.skeletons().iter().map(|s| s.frame_index).collect();
    Ok(per_part(seq, |track| {
        let mut out = track.to_vec();
        let mut last: Option<usize> = None;
        for (i, p) in track.iter().enumerate() {
            if !p.is_valid(threshold) {
                continue;
            }
            match last {
                None => last = Some(i),
                Some(j) => {
                    let dist = p.distance(&track[j]).unwrap_or(f64::INFINITY);
                    let elapsed = (frames[i] - frames[j]) as f64;
                    if dist / elapsed > max_speed {
                        out[i].score = 0.0;
                    } else {
                        last = Some(i);
                    }
                }
            }
        }
        out
    }))
}

/// Leave-one-out outlier test on the distance to the local mean.
///
/// For every valid frame the valid frames within `window / 2` positions on
/// either side (the frame itself excluded) give a mean position `m` and an
/// RMS scatter `s` around it. The frame is invalidated when its distance to
/// `m` exceeds `z_max * s`. Frames with fewer than three valid neighbours, or
/// with scatter below [`ZERO_SCATTER`], are left alone. All decisions use
/// the input validity.
pub fn statistical_distance_filter(seq: &PoseSequence, window: usize, z_max: f64) -> Result<PoseSequence> {
    if window < 3 {
        return Err(FilterError::InvalidParameter(format!(
            "window must be at least 3, got {window}"
        )));
    }
    if !(z_max > 0.0) {
        return Err(FilterError::InvalidParameter(format!(
            "z_max must be positive, got {z_max}"
        )));
    }
    let half = window / 2;
    let threshold = seq.score_threshold;
    Ok(per_part(seq, |track| {
        let n = track.len();
        let mut out = track.to_vec();
        for (i, p) in track.iter().enumerate() {
            if !p.is_valid(threshold) {
                continue;
            }
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let neighbours: Vec<&Part> = (lo..=hi)
                .filter(|&j| j != i && track[j].is_valid(threshold))
                .map(|j| &track[j])
                .collect();
            if neighbours.len() < 3 {
                continue;
            }
            let dims = p.dims();
            let k = neighbours.len() as f64;
            let mean: Vec<f64> = (0..dims)
                .map(|d| neighbours.iter().map(|q| q.coords[d]).sum::<f64>() / k)
                .collect();
            let dist = |c: &[f64]| c.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let scatter = (neighbours.iter().map(|q| dist(&q.coords)).sum::<f64>() / k).sqrt();
            if scatter < ZERO_SCATTER {
                continue;
            }
            if dist(&p.coords).sqrt() > z_max * scatter {
                out[i].score = 0.0;
            }
        }
        out
    }))
}
