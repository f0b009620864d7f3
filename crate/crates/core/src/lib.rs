//! Pose tracking and behavior analysis for multi-camera animal and human
//! recordings.
//!
//! Poses are [`pose::PoseSequence`]s of per-frame skeletons whose parts are
//! n-dimensional points with a confidence score. Everything else is built as
//! processors over those sequences:
//!
//! - [`pose`]: data model and the cvkit, flat CSV and DeepLabCut CSV formats
//! - [`frame_io`]: ordered frame sources with a prefetching buffer
//! - [`geometry`]: DLT cameras, triangulation, rigid transforms, EasyWand files
//! - [`filters`]: Kalman, interpolation, moving average and outlier filters
//! - [`metrics`]: MPJPE and PCK
//! - [`behavior`]: occupancy, rearing, gaze and egocentric boundary maps
//! - [`pipeline`]: processor manifests, pipeline configs and the runner
//! - [`service`]: the localhost HTTP API used by the annotation UI
//!
//! The `cvkit` binary exposes the same operations on the command line.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior;
pub mod cli;
pub mod filters;
pub mod frame_io;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod pose;
pub mod service;
