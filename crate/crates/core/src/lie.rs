//! SO(3) and SE(3) helpers.
//!
//! Rotations are stored as 3x3 matrices and rotation increments as
//! axis-angle vectors (radians). A pose increment `ξ = (v, ω)` is turned into
//! a rigid transform by exponentiating `ω` with the Rodrigues formula and
//! taking `v` as the translation directly. There is no SE(3) `V` matrix
//! coupling the two parts.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector6};

use crate::error::{Error, Result};

/// Below this rotation angle `exp_so3` switches to the second-order Taylor form.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Tolerance used when validating rotation matrices produced internally.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Distance from π below which `log_so3` extracts the axis from the
/// symmetric part of `R` instead of the skew part.
const NEAR_PI: f64 = 1e-2;

/// Axis-angle rotation vector, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct So3Vector(Vector3<f64>);

impl So3Vector {
    pub fn new(omega: Vector3<f64>) -> Result<Self> {
        if omega.iter().all(|c| c.is_finite()) {
            Ok(Self(omega))
        } else {
            Err(Error::InvalidArgument(format!(
                "rotation vector has non-finite components: {omega:?}"
            )))
        }
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vector3::new(x, y, z))
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}

/// Pose increment `ξ = (v, ω)`: translation in meters, rotation as axis-angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se3Params {
    pub v: Vector3<f64>,
    pub omega: So3Vector,
}

impl Se3Params {
    pub fn new(v: Vector3<f64>, omega: Vector3<f64>) -> Result<Self> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "translation has non-finite components: {v:?}"
            )));
        }
        Ok(Self {
            v,
            omega: So3Vector::new(omega)?,
        })
    }

    pub fn zero() -> Self {
        Self {
            v: Vector3::zeros(),
            omega: So3Vector::zero(),
        }
    }

    /// Packs as `[vx, vy, vz, ωx, ωy, ωz]`.
    pub fn to_vector(&self) -> Vector6<f64> {
        let w = self.omega.vector();
        Vector6::new(self.v.x, self.v.y, self.v.z, w.x, w.y, w.z)
    }

    pub fn from_vector(x: &Vector6<f64>) -> Result<Self> {
        Self::new(Vector3::new(x[0], x[1], x[2]), Vector3::new(x[3], x[4], x[5]))
    }
}

/// A proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    /// Validates `m` against the rotation invariants at [`ROTATION_TOLERANCE`].
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        check_rotation(&m, ROTATION_TOLERANCE)?;
        Ok(Self(m))
    }

    /// Accepts a matrix that is a rotation within `tolerance` and projects it
    /// onto SO(3) so the stored value satisfies the tight invariants.
    pub fn from_approximate(m: Matrix3<f64>, tolerance: f64) -> Result<Self> {
        check_rotation(&m, tolerance)?;
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::InvalidRotation("SVD failed".into())),
        };
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Ok(Self(r))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    // Products of rotations are rotations; no re-validation on the hot path.
    pub(crate) fn from_product(m: Matrix3<f64>) -> Self {
        Self(m)
    }
}

fn check_rotation(m: &Matrix3<f64>, tolerance: f64) -> Result<()> {
    if !m.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidRotation("non-finite entries".into()));
    }
    let ortho = (m.transpose() * m - Matrix3::identity()).norm();
    if ortho > tolerance {
        return Err(Error::InvalidRotation(format!(
            "orthonormality check failed: |RᵀR - I|_F = {ortho:.3e} exceeds {tolerance:.1e}"
        )));
    }
    let det = m.determinant();
    if (det - 1.0).abs() > tolerance {
        return Err(Error::InvalidRotation(format!(
            "determinant check failed: det(R) = {det:.6} (expected 1)"
        )));
    }
    Ok(())
}

/// Rigid-body transform mapping `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: RotationMatrix, translation: Vector3<f64>) -> Result<Self> {
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "translation has non-finite components: {translation:?}"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: RotationMatrix::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: RotationMatrix::identity(),
            translation: t,
        }
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.0 * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        compose(self, other)
    }

    pub fn inverse(&self) -> RigidTransform {
        inverse(self)
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation.0);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Builds a transform from the top 3x4 block of a homogeneous matrix,
    /// accepting a rotation that is orthonormal within `tolerance`.
    pub fn from_homogeneous(m: &Matrix4<f64>, tolerance: f64) -> Result<Self> {
        let r = RotationMatrix::from_approximate(m.fixed_view::<3, 3>(0, 0).into_owned(), tolerance)?;
        Self::new(r, m.fixed_view::<3, 1>(0, 3).into_owned())
    }

    /// The increment whose `to_transform` reproduces this transform.
    pub fn to_params(&self) -> Se3Params {
        Se3Params {
            v: self.translation,
            omega: log_so3(&self.rotation),
        }
    }
}

/// Cross-product matrix: `hat(ω)·x = ω × x`.
pub fn hat(omega: &So3Vector) -> Matrix3<f64> {
    skew(omega.vector())
}

pub(crate) fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Exponential map so(3) → SO(3) via the Rodrigues formula.
pub fn exp_so3(omega: &So3Vector) -> RotationMatrix {
    let w = omega.vector();
    let theta = w.norm();
    let k = skew(w);
    let k2 = k * k;
    let m = if theta < SMALL_ANGLE {
        Matrix3::identity() + k + k2 * 0.5
    } else {
        let half = 0.5 * theta;
        // 1 - cos θ = 2 sin²(θ/2) avoids cancellation for small θ.
        let one_minus_cos = 2.0 * half.sin() * half.sin();
        Matrix3::identity() + k * (theta.sin() / theta) + k2 * (one_minus_cos / (theta * theta))
    };
    RotationMatrix(m)
}

/// Right Jacobian of SO(3): `exp(ω + δ) ≈ exp(ω)·exp(J_r(ω)·δ)`.
pub fn right_jacobian_so3(omega: &So3Vector) -> Matrix3<f64> {
    let w = omega.vector();
    let theta = w.norm();
    let k = skew(w);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() - k * 0.5 + k * k / 6.0;
    }
    let half = 0.5 * theta;
    let one_minus_cos = 2.0 * half.sin() * half.sin();
    Matrix3::identity() - k * (one_minus_cos / (theta * theta)) + k * k * ((theta - theta.sin()) / (theta * theta * theta))
}

/// Logarithm map SO(3) → so(3); the result has norm at most π.
///
/// Near θ = π the axis is read from the column of `(R + Rᵀ)/2 - cos θ·I`
/// with the largest diagonal entry, and its sign is chosen to agree with the
/// skew part of `R` when that part is still informative.
pub fn log_so3(r: &RotationMatrix) -> So3Vector {
    let m = r.matrix();
    let skew_part = vee(&(m - m.transpose())) * 0.5; // sin θ · axis
    let sin_theta = skew_part.norm();
    let cos_theta = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = sin_theta.atan2(cos_theta);

    if theta < 1e-4 {
        // θ / sin θ = 1 + θ²/6 + O(θ⁴)
        return So3Vector(skew_part * (1.0 + theta * theta / 6.0));
    }
    if PI - theta > NEAR_PI {
        return So3Vector(skew_part * (theta / sin_theta));
    }

    let sym = (m + m.transpose()) * 0.5;
    let outer = (sym - Matrix3::identity() * cos_theta) / (1.0 - cos_theta); // a·aᵀ
    let k = (0..3)
        .max_by(|&i, &j| outer[(i, i)].total_cmp(&outer[(j, j)]))
        .unwrap_or(0);
    let ak = outer[(k, k)].max(0.0).sqrt();
    let mut axis = Vector3::from_fn(|i, _| if i == k { ak } else { outer[(i, k)] / ak });
    axis /= axis.norm();
    if axis.dot(&skew_part) < 0.0 {
        axis = -axis;
    }
    So3Vector(axis * theta)
}

/// Assembles `T = (exp(ω), v)`.
pub fn to_transform(xi: &Se3Params) -> RigidTransform {
    RigidTransform {
        rotation: exp_so3(&xi.omega),
        translation: xi.v,
    }
}

/// `a ∘ b`: applies `b` first, then `a`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform {
        rotation: RotationMatrix(a.rotation.0 * b.rotation.0),
        translation: a.rotation.0 * b.translation + a.translation,
    }
}

pub fn inverse(t: &RigidTransform) -> RigidTransform {
    let rt = t.rotation.0.transpose();
    RigidTransform {
        rotation: RotationMatrix(rt),
        translation: -(rt * t.translation),
    }
}
