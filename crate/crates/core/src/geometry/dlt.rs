use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x4, Matrix4, Point2, Point3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Result};

/// Smallest admissible magnitude of the projection denominator.
pub const DENOMINATOR_EPS: f64 = 1e-6;

/// Triangulation systems with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative eigenvalue floor of the 3D point covariance below which a
/// calibration set counts as coplanar.
const COPLANAR_RATIO: f64 = 1e-10;

/// A camera described by its 11 DLT coefficients `L1..L11`.
///
/// ```text
/// u = (L1 X + L2 Y + L3 Z + L4) / (L9 X + L10 Y + L11 Z + 1)
/// v = (L5 X + L6 Y + L7 Z + L8) / (L9 X + L10 Y + L11 Z + 1)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraProfile {
    pub name: String,
    pub dlt: [f64; 11],
    /// Image size in pixels; 0 when unknown (e.g. loaded from a bare coefficient file).
    pub width: u32,
    pub height: u32,
}

impl CameraProfile {
    pub fn new(name: impl Into<String>, dlt: [f64; 11], width: u32, height: u32) -> Self {
        Self {
            name: name.into(),
            dlt,
            width,
            height,
        }
    }

    /// Converts a 3x4 projection matrix (e.g. `K [R | t]`) to DLT form by
    /// normalizing its bottom-right entry to 1.
    pub fn from_projection_matrix(
        name: impl Into<String>,
        p: &Matrix3x4<f64>,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let s = p[(2, 3)];
        if s.abs() < f64::EPSILON * p.norm() {
            return Err(GeometryError::DegenerateCamera);
        }
        let p = p / s;
        let dlt = [
            p[(0, 0)],
            p[(0, 1)],
            p[(0, 2)],
            p[(0, 3)],
            p[(1, 0)],
            p[(1, 1)],
            p[(1, 2)],
            p[(1, 3)],
            p[(2, 0)],
            p[(2, 1)],
            p[(2, 2)],
        ];
        Ok(Self::new(name, dlt, width, height))
    }

    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        let l = &self.dlt;
        Matrix3x4::new(l[0], l[1], l[2], l[3], l[4], l[5], l[6], l[7], l[8], l[9], l[10], 1.0)
    }

    fn denominator(&self, p: &Point3<f64>) -> f64 {
        self.dlt[8] * p.x + self.dlt[9] * p.y + self.dlt[10] * p.z + 1.0
    }

    pub fn project(&self, p: &Point3<f64>) -> Result<Point2<f64>> {
        dlt_project(self, p)
    }

    /// Checks that the projection denominator keeps one sign and stays away
    /// from zero over the whole volume. The denominator is affine, so the
    /// corners bound it.
    pub fn check_volume(&self, volume: &WorkingVolume) -> Result<()> {
        let dens: Vec<f64> = volume.corners().iter().map(|c| self.denominator(c)).collect();
        let positive = dens.iter().all(|d| *d > DENOMINATOR_EPS);
        let negative = dens.iter().all(|d| *d < -DENOMINATOR_EPS);
        if positive || negative {
            Ok(())
        } else {
            let worst = dens.iter().copied().fold(f64::INFINITY, |a, d| a.min(d.abs()));
            Err(GeometryError::DegenerateDenominator(worst))
        }
    }
}

/// Axis-aligned box in world units where the DLT cameras are valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkingVolume {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl WorkingVolume {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Option<Self> {
        (0..3).all(|k| min[k] < max[k]).then_some(Self { min, max })
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn corners(&self) -> [Point3<f64>; 8] {
        std::array::from_fn(|i| {
            let pick = |k: usize| if i >> k & 1 == 0 { self.min[k] } else { self.max[k] };
            Point3::new(pick(0), pick(1), pick(2))
        })
    }
}

/// Projects a world point into the image plane. No clamping to image bounds.
pub fn dlt_project(cam: &CameraProfile, p: &Point3<f64>) -> Result<Point2<f64>> {
    let l = &cam.dlt;
    let den = cam.denominator(p);
    if den.abs() < DENOMINATOR_EPS {
        return Err(GeometryError::DegenerateDenominator(den));
    }
    Ok(Point2::new(
        (l[0] * p.x + l[1] * p.y + l[2] * p.z + l[3]) / den,
        (l[4] * p.x + l[5] * p.y + l[6] * p.z + l[7]) / den,
    ))
}

/// One 2D detection of a point in camera `camera`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub camera: usize,
    pub point: Point2<f64>,
    pub score: f64,
}

impl Observation {
    pub fn new(camera: usize, point: Point2<f64>, score: f64) -> Self {
        Self { camera, point, score }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstruction {
    pub point: Point3<f64>,
    /// Root mean square reprojection error over the contributing views, pixels.
    pub rms_residual: f64,
    pub views: usize,
}

/// Triangulates one point from two or more views.
///
/// Observations scoring below `threshold` are dropped; the remaining rows of
/// the linear system are scaled by the observation score. The system is
/// checked for rank by SVD and solved by QR.
pub fn dlt_reconstruct(cams: &[CameraProfile], obs: &[Observation], threshold: f64) -> Result<Reconstruction> {
    if let Some(o) = obs.iter().find(|o| o.camera >= cams.len()) {
        return Err(GeometryError::UnknownCamera(o.camera));
    }
    let used: Vec<&Observation> = obs.iter().filter(|o| o.score >= threshold).collect();
    let mut distinct: Vec<usize> = used.iter().map(|o| o.camera).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(GeometryError::InsufficientViews(distinct.len()));
    }

    let mut a = DMatrix::<f64>::zeros(2 * used.len(), 3);
    let mut b = DVector::<f64>::zeros(2 * used.len());
    for (i, o) in used.iter().enumerate() {
        let l = &cams[o.camera].dlt;
        let (u, v, w) = (o.point.x, o.point.y, o.score);
        a.row_mut(2 * i)
            .copy_from_slice(&[w * (u * l[8] - l[0]), w * (u * l[9] - l[1]), w * (u * l[10] - l[2])]);
        b[2 * i] = w * (l[3] - u);
        a.row_mut(2 * i + 1)
            .copy_from_slice(&[w * (v * l[8] - l[4]), w * (v * l[9] - l[5]), w * (v * l[10] - l[6])]);
        b[2 * i + 1] = w * (l[7] - v);
    }

    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(GeometryError::RankDeficient(condition));
    }
    // nalgebra's SVD solve loses digits on some well-conditioned systems;
    // Householder QR does not.
    let qr = a.qr();
    let x = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &b))
        .ok_or(GeometryError::RankDeficient(condition))?;
    let point = Point3::new(x[0], x[1], x[2]);

    let mut sq = 0.0;
    for o in &used {
        let proj = dlt_project(&cams[o.camera], &point)?;
        sq += (proj - o.point).norm_squared();
    }
    Ok(Reconstruction {
        point,
        rms_residual: (sq / used.len() as f64).sqrt(),
        views: used.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub world: Point3<f64>,
    pub image: Point2<f64>,
}

impl Correspondence {
    pub fn new(world: Point3<f64>, image: Point2<f64>) -> Self {
        Self { world, image }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DltFit {
    pub dlt: [f64; 11],
    /// Mean Euclidean reprojection error over the input correspondences, pixels.
    pub mean_error: f64,
}

impl DltFit {
    pub fn into_camera(self, name: impl Into<String>, width: u32, height: u32) -> CameraProfile {
        CameraProfile::new(name, self.dlt, width, height)
    }
}

/// Fits DLT coefficients to 3D-2D correspondences.
///
/// Points are Hartley-normalized, the homogeneous 12-parameter system is
/// solved by SVD, and the result is denormalized and scaled so that the
/// bottom-right entry of the projection matrix is 1.
pub fn fit_dlt(correspondences: &[Correspondence]) -> Result<DltFit> {
    let n = correspondences.len();
    if n < 6 {
        return Err(GeometryError::TooFewPoints(n));
    }
    let world: Vec<Vector3<f64>> = correspondences.iter().map(|c| c.world.coords).collect();
    let centroid = world.iter().sum::<Vector3<f64>>() / n as f64;
    let cov = world
        .iter()
        .map(|p| (p - centroid) * (p - centroid).transpose())
        .sum::<Matrix3<f64>>()
        / n as f64;
    let eig = SymmetricEigen::new(cov).eigenvalues;
    if eig.min() <= COPLANAR_RATIO * eig.max().max(f64::MIN_POSITIVE) {
        return Err(GeometryError::CoplanarPoints);
    }

    let t3 = similarity_3d(&world);
    let image: Vec<_> = correspondences.iter().map(|c| c.image.coords).collect();
    let img_centroid = image.iter().sum::<nalgebra::Vector2<f64>>() / n as f64;
    let img_mean_dist = image.iter().map(|p| (p - img_centroid).norm()).sum::<f64>() / n as f64;
    let s2 = if img_mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / img_mean_dist
    } else {
        1.0
    };
    let t2 = Matrix3::new(
        s2,
        0.0,
        -s2 * img_centroid.x,
        0.0,
        s2,
        -s2 * img_centroid.y,
        0.0,
        0.0,
        1.0,
    );

    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, c) in correspondences.iter().enumerate() {
        let w = t3 * c.world.to_homogeneous();
        let im = t2 * c.image.to_homogeneous();
        let (x, y, z) = (w[0], w[1], w[2]);
        let (u, v) = (im[0], im[1]);
        a.row_mut(2 * i)
            .copy_from_slice(&[x, y, z, 1.0, 0.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u * z, -u]);
        a.row_mut(2 * i + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, 0.0, x, y, z, 1.0, -v * x, -v * y, -v * z, -v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let (null_idx, _) = svd.singular_values.argmin();
    let p: Vec<f64> = v_t.row(null_idx).iter().copied().collect();
    let pn = Matrix3x4::from_row_slice(&p);
    let t2_inv = t2.try_inverse().expect("similarity is invertible");
    let full = t2_inv * pn * t3;
    let camera = CameraProfile::from_projection_matrix("fitted", &full, 0, 0)?;

    let mut total = 0.0;
    for c in correspondences {
        total += (dlt_project(&camera, &c.world)? - c.image).norm();
    }
    Ok(DltFit {
        dlt: camera.dlt,
        mean_error: total / n as f64,
    })
}

/// Translates the centroid to the origin and scales the mean distance to sqrt(3).
fn similarity_3d(points: &[Vector3<f64>]) -> Matrix4<f64> {
    let n = points.len() as f64;
    let c = points.iter().sum::<Vector3<f64>>() / n;
    let mean = points.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if mean > 0.0 { 3f64.sqrt() / mean } else { 1.0 };
    Matrix4::new(
        s,
        0.0,
        0.0,
        -s * c.x,
        0.0,
        s,
        0.0,
        -s * c.y,
        0.0,
        0.0,
        s,
        -s * c.z,
        0.0,
        0.0,
        0.0,
        1.0,
    )
}

/// Reads an EasyWand-style coefficient file: 11 rows, one column per
/// camera, no header. Camera `j` is named `camera_j`.
pub fn load_dlt_coefficients(path: impl AsRef<Path>) -> Result<Vec<CameraProfile>> {
    read_dlt_coefficients(File::open(path.as_ref())?)
}

pub fn read_dlt_coefficients<R: Read>(reader: R) -> Result<Vec<CameraProfile>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| GeometryError::MalformedCsv(format!("row {}: cannot parse `{c}`", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != 11 {
        return Err(GeometryError::MalformedCsv(format!(
            "expected 11 rows, found {}",
            rows.len()
        )));
    }
    let cams = rows[0].len();
    if cams == 0 || rows.iter().any(|r| r.len() != cams) {
        return Err(GeometryError::MalformedCsv("rows have differing column counts".into()));
    }
    Ok((0..cams)
        .map(|j| {
            let dlt = std::array::from_fn(|k| rows[k][j]);
            CameraProfile::new(format!("camera_{j}"), dlt, 0, 0)
        })
        .collect())
}

/// Writes cameras as an 11-row coefficient file, one column per camera.
pub fn write_dlt_coefficients<W: Write>(cams: &[CameraProfile], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for k in 0..11 {
        wtr.write_record(cams.iter().map(|c| c.dlt[k].to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
