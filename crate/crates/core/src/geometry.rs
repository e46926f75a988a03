//! Small fixed-size geometry: Cayley rotations, essential matrices,
//! Householder reflections and epipolar residuals.

use nalgebra::{Matrix3x4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Cayley parameters `a = (u, v, w)` of a rotation
/// `R = (I - [a]x)(I + [a]x)^-1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CayleyVector {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl CayleyVector {
    pub const fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    pub fn as_vec3(&self) -> Vec3 {
        Vec3::new(self.u, self.v, self.w)
    }

    pub fn from_vec3(a: &Vec3) -> Self {
        Self::new(a.x, a.y, a.z)
    }

    /// `1 + u^2 + v^2 + w^2`
    pub fn delta(&self) -> f64 {
        1.0 + self.u * self.u + self.v * self.v + self.w * self.w
    }
}

/// Proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Mat3);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Wraps `m` after checking orthonormality and `det = +1` within `tol` per entry.
    pub fn from_matrix(m: Mat3, tol: f64) -> Option<Self> {
        let gram = m.transpose() * m - Mat3::identity();
        if gram.amax() <= tol && (m.determinant() - 1.0).abs() <= tol {
            Some(Self(m))
        } else {
            None
        }
    }

    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    /// Rotation by `angle` radians about `axis` (Rodrigues).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let k = axis.normalize();
        let kx = skew(&k);
        Self(Mat3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos()))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Rotation angle in `[0, π]`. Equal to `acos((tr R - 1) / 2)`, computed
    /// with `atan2` to stay accurate near zero.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let s = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm();
        s.atan2(self.0.trace() - 1.0)
    }
}

impl std::ops::Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

/// Translation direction with unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitTranslation(Vec3);

impl UnitTranslation {
    pub fn new_normalize(t: Vec3) -> Result<Self> {
        let n = t.norm();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(Self(t / n))
    }

    pub fn new_unchecked(t: Vec3) -> Self {
        Self(t)
    }

    pub fn vector(&self) -> &Vec3 {
        &self.0
    }
}

impl std::ops::Neg for UnitTranslation {
    type Output = UnitTranslation;
    fn neg(self) -> UnitTranslation {
        UnitTranslation(-self.0)
    }
}

/// Second camera matrix `P2 = [R | t]` relative to `P1 = [I | 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub rotation: Rotation3,
    pub translation: UnitTranslation,
}

impl RelativePose {
    pub fn new(rotation: Rotation3, translation: UnitTranslation) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn camera_matrix(&self) -> Matrix3x4<f64> {
        let mut p = Matrix3x4::zeros();
        p.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        p.set_column(3, self.translation.vector());
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialMatrix(Mat3);

impl EssentialMatrix {
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// Checks `det E = 0` and `2 E E^T E - tr(E E^T) E = 0`, both relative to the scale of `E`.
    pub fn satisfies_constraints(&self, tol: f64) -> bool {
        let e = &self.0;
        let s = e.norm();
        if s == 0.0 {
            return true;
        }
        let det_ok = e.determinant().abs() <= tol * s * s * s;
        let eet = e * e.transpose();
        let cubic = 2.0 * eet * e - eet.trace() * e;
        det_ok && cubic.amax() <= tol * s * s * s
    }
}

/// Pair of unit bearings of one scene point, seen from camera 1 and camera 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub q1: Vec3,
    pub q2: Vec3,
}

impl Correspondence {
    /// Normalizes both bearings to unit length.
    pub fn new(q1: Vec3, q2: Vec3) -> Result<Self> {
        let n1 = q1.norm();
        let n2 = q2.norm();
        if !(n1 > Tolerances::STANDARD.min_column_norm && n1.is_finite())
            || !(n2 > Tolerances::STANDARD.min_column_norm && n2.is_finite())
        {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            q1: q1 / n1,
            q2: q2 / n2,
        })
    }
}

/// Angle between two vectors in `[0, π]`.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Cross-product matrix: `skew(v) * b == v x b`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `Delta * R` for the Cayley rotation of `a`, i.e. `(1 - |a|^2) I + 2 a a^T - 2 [a]x`.
pub fn cayley_scaled_rotation(a: &CayleyVector) -> Mat3 {
    let av = a.as_vec3();
    Mat3::identity() * (1.0 - av.norm_squared()) + 2.0 * av * av.transpose() - 2.0 * skew(&av)
}

pub fn cayley_to_rotation(a: &CayleyVector) -> Rotation3 {
    Rotation3(cayley_scaled_rotation(a) / a.delta())
}

/// Inverse of [`cayley_to_rotation`]: `a = vee(R^T - R) / (1 + tr R)`.
pub fn rotation_to_cayley(r: &Rotation3) -> Result<CayleyVector> {
    let m = r.matrix();
    let denom = 1.0 + m.trace();
    if denom.abs() < Tolerances::STANDARD.angle_near_pi {
        return Err(Error::AngleNearPi(denom.abs()));
    }
    // vee of the antisymmetric part R^T - R = 4 [a]x / Delta
    Ok(CayleyVector::new(
        (m[(1, 2)] - m[(2, 1)]) / denom,
        (m[(2, 0)] - m[(0, 2)]) / denom,
        (m[(0, 1)] - m[(1, 0)]) / denom,
    ))
}

pub fn essential_from_pose(p: &RelativePose) -> EssentialMatrix {
    EssentialMatrix(skew(p.translation.vector()) * p.rotation.matrix())
}

/// `q2^T E q1`
pub fn epipolar_residual(e: &EssentialMatrix, c: &Correspondence) -> f64 {
    c.q2.dot(&(e.matrix() * c.q1))
}

/// Cayley vector of `-H_t R`, the rotation whose essential matrix with the
/// same `t` is `-E`.
pub fn twisted_cayley(a: &CayleyVector, t: &UnitTranslation) -> Result<CayleyVector> {
    let t = t.vector();
    let delta = a.u * t.x + a.v * t.y + a.w * t.z;
    if delta.abs() <= Tolerances::STANDARD.twisted_delta {
        return Err(Error::DegenerateDelta(delta));
    }
    Ok(CayleyVector::new(
        (-t.x - a.v * t.z + a.w * t.y) / delta,
        (-t.y - a.w * t.x + a.u * t.z) / delta,
        (-t.z - a.u * t.y + a.v * t.x) / delta,
    ))
}

/// `I - 2 h h^T / (h^T h)`
pub fn householder_from_vector(h: &Vec3) -> Result<Mat3> {
    let nn = h.norm_squared();
    if !(h.norm() > 1e-300) {
        return Err(Error::ZeroVector);
    }
    Ok(Mat3::identity() - (2.0 / nn) * h * h.transpose())
}

/// `-(I - 2 t t^T) R`
pub fn twisted_rotation(r: &Rotation3, t: &UnitTranslation) -> Rotation3 {
    let t = t.vector();
    let ht = Mat3::identity() - 2.0 * t * t.transpose();
    Rotation3(-ht * r.matrix())
}

/// `sign(0) = +1`
pub(crate) fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}
