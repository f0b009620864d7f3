//! Camera geometry: the 11-parameter DLT camera model, multi-view
//! triangulation, DLT fitting, calibration-frame selection and EasyWand file
//! interop, and rigid transforms of 3D pose data.

mod calibration;
mod dlt;
mod rigid;

use thiserror::Error;

pub use calibration::{
    export_easywand_package, read_easywand_points, select_calibration_frames, synchronized_frames, CameraAnnotations,
    EASYWAND_MANIFEST,
};
pub use dlt::{
    dlt_project, dlt_reconstruct, fit_dlt, load_dlt_coefficients, read_dlt_coefficients, write_dlt_coefficients,
    CameraProfile, Correspondence, DltFit, Observation, Reconstruction, WorkingVolume, DENOMINATOR_EPS, MAX_CONDITION,
};
pub use rigid::{align_axes, apply_rigid, RigidTransform};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("projection denominator {0:e} is too close to zero")]
    DegenerateDenominator(f64),
    #[error("need at least 2 valid views from distinct cameras, got {0}")]
    InsufficientViews(usize),
    #[error("linear system is rank deficient (condition number {0:e})")]
    RankDeficient(f64),
    #[error("observation references unknown camera {0}")]
    UnknownCamera(usize),
    #[error("need at least 6 correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("3D calibration points are coplanar")]
    CoplanarPoints,
    #[error("fitted camera has its center on the world origin plane")]
    DegenerateCamera,
    #[error("malformed DLT coefficient file: {0}")]
    MalformedCsv(String),
    #[error("no synchronized annotated frames to export")]
    EmptyAnnotationSet,
    #[error("requested {requested} frames but only {available} are annotated in every camera")]
    NotEnoughAnnotatedFrames { requested: usize, available: usize },
    #[error("alignment points are collinear")]
    CollinearPoints,
    #[error("rotation matrix is not orthonormal with determinant +1")]
    InvalidRotation,
    #[error("operation needs 3D poses, sequence has {0} dimensions")]
    NotThreeD(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;
