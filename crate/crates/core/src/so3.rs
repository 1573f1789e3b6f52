//! SO(3) primitives: the cross-product matrix and its inverse, the finite
//! rotation formula, the logarithm map and attitude error measurement.
//!
//! Attitudes are passive direction cosine matrices `T` mapping frame I
//! coordinates into frame B coordinates, `x_B = T x_I`. The rotation vector
//! `phi` relates to `T` through `T(phi) = exp(-[phi x])`. Lie-group texts often
//! use exponential coordinates `s = -phi` instead; that convention is never
//! stored here, every interface takes `phi`. The reverse map `S = T^-1` is
//! [`Dcm::transpose`].

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this angle the exp/log maps switch to their series forms.
pub const SMALL_ANGLE: f64 = 1e-4;

/// Default tolerance on `|M + M^T|_F` accepted by [`vee`].
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Largest angle accepted by [`rotation_vector_from_dcm`].
pub const MAX_LOG_ANGLE: f64 = std::f64::consts::PI - 1e-6;

const DRIFT_LIMIT: f64 = 1e-12;

/// A rotation vector `phi = angle * axis` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotationVector(Vec3);

impl RotationVector {
    pub fn new(phi: Vec3) -> Self {
        Self(phi)
    }

    pub fn from_components(x: f64, y: f64, z: f64) -> Self {
        Self(Vec3::new(x, y, z))
    }

    pub fn zero() -> Self {
        Self(Vec3::zeros())
    }

    pub fn vector(&self) -> Vec3 {
        self.0
    }

    /// Rotation angle, `|phi|`.
    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}

impl From<Vec3> for RotationVector {
    fn from(v: Vec3) -> Self {
        Self(v)
    }
}

/// Proper orthogonal change-of-basis matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dcm(Mat3);

impl Dcm {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Wraps `m` after checking `|m^T m - I|_F <= 1e-12` and `det(m) = 1`.
    pub fn new(m: Mat3) -> Result<Self> {
        let residual = orthogonality_residual(&m);
        let det = m.determinant();
        if !residual.is_finite() || residual > DRIFT_LIMIT || (det - 1.0).abs() > DRIFT_LIMIT {
            return Err(Error::NotNearOrthogonal {
                reason: format!("orthogonality residual {residual:e}, determinant {det}"),
            });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// The reverse transformation `S = T^T`.
    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `|T^T T - I|_F`.
    pub fn orthogonality_residual(&self) -> f64 {
        orthogonality_residual(&self.0)
    }

    pub fn transform(&self, x: &Vec3) -> Vec3 {
        self.0 * x
    }
}

fn orthogonality_residual(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// Cross-product matrix `[v x]`, so that `wedge(v) * b == v.cross(&b)`.
pub fn wedge(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`wedge`] with the default skew tolerance.
pub fn vee(m: &Mat3) -> Result<Vec3> {
    vee_with_tolerance(m, SKEW_TOLERANCE)
}

pub fn vee_with_tolerance(m: &Mat3, tolerance: f64) -> Result<Vec3> {
    let residual = (m + m.transpose()).norm();
    if !(residual <= tolerance) {
        return Err(Error::NotSkewSymmetric { residual });
    }
    Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// Finite rotation formula `T = I - sin(phi)[e x] + (1 - cos(phi))[e x]^2`,
/// evaluated on `[phi x]` directly so that no axis has to be extracted.
pub fn dcm_from_rotation_vector(phi: &RotationVector) -> Dcm {
    let v = phi.vector();
    let angle = v.norm();
    let (sin_term, cos_term) = if angle < SMALL_ANGLE {
        let a2 = angle * angle;
        (1.0 - a2 / 6.0, 0.5 - a2 / 24.0)
    } else {
        let half = 0.5 * angle;
        let s = half.sin() / half;
        (angle.sin() / angle, 0.5 * s * s)
    };
    let k = wedge(&v);
    Dcm(Mat3::identity() - k * sin_term + k * k * cos_term)
}

/// Logarithm map, the inverse of [`dcm_from_rotation_vector`] on angles
/// below `pi - 1e-6`.
pub fn rotation_vector_from_dcm(t: &Dcm) -> Result<RotationVector> {
    let m = t.matrix();
    // skew part of T is -sin(angle) [e x]
    let skew = Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    );
    let sin_angle = skew.norm();
    let cos_angle = 0.5 * (m.trace() - 1.0);
    let angle = sin_angle.atan2(cos_angle);
    if angle > MAX_LOG_ANGLE {
        return Err(Error::NearPiRotation { angle });
    }
    if angle < SMALL_ANGLE {
        return Ok(RotationVector(-skew * (1.0 + angle * angle / 6.0)));
    }
    if cos_angle > -0.5 {
        return Ok(RotationVector(-skew * (angle / sin_angle)));
    }
    // Past 120 degrees the skew part is small; read the axis from the
    // symmetric part, cos(a) I + (1 - cos(a)) e e^T, and the sign from the skew part.
    let sym = (m + m.transpose()) * 0.5;
    let outer = (sym - Mat3::identity() * cos_angle) / (1.0 - cos_angle);
    let col = (0..3)
        .max_by(|&a, &b| outer[(a, a)].total_cmp(&outer[(b, b)]))
        .unwrap_or(0);
    let mut axis: Vec3 = outer.column(col).into();
    axis /= axis.norm();
    if axis.dot(&skew) > 0.0 {
        axis = -axis;
    }
    Ok(RotationVector(axis * angle))
}

/// `T2 * T1`: apply `T1` first, then `T2`. Re-projects onto SO(3) when the
/// product has drifted by more than 1e-12.
pub fn compose(t2: &Dcm, t1: &Dcm) -> Dcm {
    let product = t2.0 * t1.0;
    if orthogonality_residual(&product) > DRIFT_LIMIT {
        if let Ok(fixed) = orthonormalize(&product) {
            return fixed;
        }
    }
    Dcm(product)
}

/// Angle of the relative rotation `T_est * T_ref^T`.
pub fn attitude_error_angle(estimate: &Dcm, reference: &Dcm) -> Result<f64> {
    let relative = Dcm(estimate.0 * reference.0.transpose());
    Ok(rotation_vector_from_dcm(&relative)?.angle())
}

const ORTHO_TOLERANCE: f64 = 1e-14;
const ORTHO_MAX_ITERATIONS: usize = 10;

/// Nearest proper orthogonal matrix via the iteration
/// `T <- 3/2 T - 1/2 T T^T T`.
pub fn orthonormalize(m: &Mat3) -> Result<Dcm> {
    let det = m.determinant();
    let residual = orthogonality_residual(m);
    if !(det > 0.0) || !(residual < 0.1) {
        return Err(Error::NotNearOrthogonal {
            reason: format!("determinant {det}, orthogonality residual {residual:e}"),
        });
    }
    let mut t = *m;
    for _ in 0..=ORTHO_MAX_ITERATIONS {
        if orthogonality_residual(&t) <= ORTHO_TOLERANCE {
            return Ok(Dcm(t));
        }
        t = t * 1.5 - t * t.transpose() * t * 0.5;
    }
    Err(Error::NotNearOrthogonal {
        reason: format!(
            "projection did not converge in {ORTHO_MAX_ITERATIONS} iterations (residual {:e})",
            orthogonality_residual(&t)
        ),
    })
}
