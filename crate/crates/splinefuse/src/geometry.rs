//! Minimal Lie-group layer: SO(3)/SE(3) elements with exponential/logarithm
//! maps and the hat/vee operators.
//!
//! Rotations are stored as orthonormal 3x3 matrices; every contract below is
//! on the matrix action. The exponential uses the Rodrigues formula with a
//! second-order Taylor fallback below `SMALL_ANGLE`, and the logarithm refuses
//! angles within `LOG_GUARD` of pi where the principal branch is unstable.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Below this angle the Rodrigues coefficients switch to their Taylor series.
pub const SMALL_ANGLE: f64 = 1e-8;
/// Logarithms are rejected for angles within this margin of pi.
pub const LOG_GUARD: f64 = 1e-6;

/// Skew-symmetric matrix of `v`, i.e. `hat(v) * w == v.cross(&w)`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]; the input must be skew-symmetric within 1e-9 per entry.
pub fn vee(m: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let sym = m + m.transpose();
    if sym.abs().max() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "vee of a non-skew matrix (max |M + M^T| = {:.3e})",
            sym.abs().max()
        )));
    }
    Ok(Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// A rotation matrix in SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix after checking orthonormality and unit determinant
    /// (1e-9 per entry).
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let defect = (m * m.transpose() - Matrix3::identity()).abs().max();
        if defect > 1e-9 || (m.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "matrix is not a rotation (orthonormality defect {:.3e}, det {:.12})",
                defect,
                m.determinant()
            )));
        }
        Ok(Rotation(m))
    }

    /// Trusts the caller that `m` is orthonormal. Used on internal products of
    /// already-valid rotations.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    /// Rotation angle in [0, pi].
    pub fn angle(&self) -> f64 {
        ((self.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    /// Hamilton quaternion (w, x, y, z), w >= 0 for a canonical sign.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let m = &self.0;
        let t = m.trace();
        let (w, x, y, z) = if t > 0.0 {
            let s = (t + 1.0).sqrt() * 2.0;
            (
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            (
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        if w < 0.0 {
            [-w, -x, -y, -z]
        } else {
            [w, x, y, z]
        }
    }

    /// Builds a rotation from a Hamilton quaternion (w, x, y, z); the input is
    /// normalized first.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "quaternion norm {n} is not usable"
            )));
        }
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        let m = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        Ok(Rotation(m))
    }

    /// Infallible exponential used on internal, known-finite tangent vectors.
    pub(crate) fn exp(phi: &Vector3<f64>) -> Self {
        let theta2 = phi.norm_squared();
        let phi_hat = hat(phi);
        if theta2 < SMALL_ANGLE * SMALL_ANGLE {
            // 2nd-order Taylor, exact to machine precision at this scale.
            Rotation(Matrix3::identity() + phi_hat + phi_hat * phi_hat * 0.5)
        } else {
            let theta = theta2.sqrt();
            let a = theta.sin() / theta;
            let b = (1.0 - theta.cos()) / theta2;
            Rotation(Matrix3::identity() + phi_hat * a + phi_hat * phi_hat * b)
        }
    }
}

/// Exponential map so(3) -> SO(3) (Rodrigues formula).
pub fn so3_exp(phi: &Vector3<f64>) -> Result<Rotation> {
    if !phi.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite rotation vector {:?}",
            phi
        )));
    }
    Ok(Rotation::exp(phi))
}

/// Logarithm map SO(3) -> so(3) on the principal branch.
///
/// Angles within [`LOG_GUARD`] of pi are rejected: there the axis extraction
/// from the skew part loses all precision.
pub fn so3_log(r: &Rotation) -> Result<Vector3<f64>> {
    let theta = r.angle();
    if theta > std::f64::consts::PI - LOG_GUARD {
        return Err(Error::NearSingularLog { angle: theta });
    }
    let m = r.matrix();
    let skew = Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    );
    if theta < SMALL_ANGLE {
        // phi = skew/2 * (1 + theta^2/6 + ...); the correction is below
        // machine precision here.
        return Ok(skew * 0.5);
    }
    Ok(skew * (theta / (2.0 * theta.sin())))
}

/// Rigid transform in SE(3): rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    /// Group law: `(R_a R_b, R_a t_b + t_a)`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            translation: -rt.rotate(&self.translation),
            rotation: rt,
        }
    }

    pub fn transform(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(point) + self.translation
    }
}
