use nalgebra::{Matrix3, Point3, Vector3};

use super::{GeometryError, Result};
use crate::pose::PoseSequence;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// A proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > ORTHONORMAL_TOL || (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// `self.then(other)` applies `self` first, then `other`.
    pub fn then(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: other.rotation * self.rotation,
            translation: other.rotation * self.translation + other.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// Applies `t` to the coordinates of every part of a 3D sequence. Scores,
/// behaviors and frame indices are unchanged.
pub fn apply_rigid(t: &RigidTransform, seq: &PoseSequence) -> Result<PoseSequence> {
    if seq.dims() != 3 {
        return Err(GeometryError::NotThreeD(seq.dims()));
    }
    Ok(seq.map_parts(|_, _, part| {
        let p = t.apply(&Point3::new(part.coords[0], part.coords[1], part.coords[2]));
        part.with_coords(vec![p.x, p.y, p.z])
    }))
}

/// Builds the right-handed frame with `origin` at zero, `x_axis_point` on the
/// +X axis and `xy_plane_point` in the upper half (y > 0) of the XY plane.
pub fn align_axes(
    origin: &Point3<f64>,
    x_axis_point: &Point3<f64>,
    xy_plane_point: &Point3<f64>,
) -> Result<RigidTransform> {
    let ex = x_axis_point - origin;
    let w = xy_plane_point - origin;
    let scale = ex.norm().max(w.norm());
    if ex.norm() <= f64::EPSILON * scale.max(1.0) {
        return Err(GeometryError::CollinearPoints);
    }
    let ex = ex.normalize();
    let perp = w - ex * w.dot(&ex);
    if perp.norm() <= 1e-12 * scale.max(1.0) {
        return Err(GeometryError::CollinearPoints);
    }
    let ey = perp.normalize();
    let ez = ex.cross(&ey);
    let rotation = Matrix3::from_rows(&[ex.transpose(), ey.transpose(), ez.transpose()]);
    Ok(RigidTransform {
        rotation,
        translation: -(rotation * origin.coords),
    })
}
