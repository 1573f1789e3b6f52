//! Rotation-vector kinematics `phi_dot = J^-1(phi) omega`.
//!
//! `J^-1(phi) = I + 1/2 [phi x] + c(phi) [phi x]^2` is the inverse right
//! Jacobian; expanding the product gives the Bortz equation
//! `phi_dot = omega + 1/2 phi x omega + c(phi) phi x (phi x omega)`.

use crate::error::{Error, Result};
use crate::so3::{wedge, Mat3, RotationVector, Vec3};

use std::f64::consts::PI;

/// Which inverse Jacobian drives the kinematics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum JacobianMode {
    /// Closed-form coefficient `c(phi)`.
    #[default]
    ExactClosedForm,
    /// `c(phi)` replaced by its limit 1/12.
    ThirdOrderApprox,
}

impl JacobianMode {
    pub fn name(&self) -> &'static str {
        match self {
            JacobianMode::ExactClosedForm => "exact",
            JacobianMode::ThirdOrderApprox => "approx",
        }
    }
}

/// Upper end (exclusive) of the exact-mode angle domain.
pub const MAX_JACOBIAN_ANGLE: f64 = 2.0 * PI - 1e-3;

const SERIES_THRESHOLD: f64 = 1e-3;
// Between SERIES_THRESHOLD and here the closed form cancels badly, so the
// longer Taylor expansion is used instead.
const LONG_SERIES_THRESHOLD: f64 = 0.5;

/// `c(phi) = (1/phi^2) (1 - phi sin(phi) / (2 (1 - cos(phi))))`.
pub fn jinv_coefficient(angle: f64) -> Result<f64> {
    if !(0.0..MAX_JACOBIAN_ANGLE).contains(&angle) {
        return Err(Error::AngleOutOfDomain { angle });
    }
    let a2 = angle * angle;
    if angle < SERIES_THRESHOLD {
        return Ok((1.0 + a2 / 60.0) / 12.0);
    }
    if angle < LONG_SERIES_THRESHOLD {
        // 1/12 + a^2/720 + a^4/30240 + a^6/1209600 + a^8/47900160
        //      + 691 a^10/1307674368000 + a^12/74724249600
        let c = 1.0 / 74_724_249_600.0;
        let c = c * a2 + 691.0 / 1_307_674_368_000.0;
        let c = c * a2 + 1.0 / 47_900_160.0;
        let c = c * a2 + 1.0 / 1_209_600.0;
        let c = c * a2 + 1.0 / 30_240.0;
        let c = c * a2 + 1.0 / 720.0;
        return Ok(c * a2 + 1.0 / 12.0);
    }
    // phi sin(phi) / (2 (1 - cos(phi))) = (phi/2) cot(phi/2)
    let half = 0.5 * angle;
    Ok((1.0 - half * half.cos() / half.sin()) / a2)
}

/// Inverse right Jacobian `I + 1/2 [phi x] + c [phi x]^2`.
pub fn jinv(phi: &RotationVector, mode: JacobianMode) -> Result<Mat3> {
    let c = match mode {
        JacobianMode::ExactClosedForm => jinv_coefficient(phi.angle())?,
        JacobianMode::ThirdOrderApprox => {
            if !phi.vector().iter().all(|x| x.is_finite()) {
                return Err(Error::AngleOutOfDomain { angle: phi.angle() });
            }
            1.0 / 12.0
        }
    };
    let k = wedge(&phi.vector());
    Ok(Mat3::identity() + k * 0.5 + k * k * c)
}

/// Right Jacobian `J` with `omega = J phi_dot`, obtained by inverting the
/// exact inverse Jacobian.
pub fn forward_jacobian(phi: &RotationVector) -> Result<Mat3> {
    let inverse = jinv(phi, JacobianMode::ExactClosedForm)?;
    inverse
        .try_inverse()
        .ok_or(Error::AngleOutOfDomain { angle: phi.angle() })
}

/// Right-hand side of the rotation-vector ODE, `J^-1(phi) omega`.
pub fn bortz_rhs(phi: &RotationVector, omega: &Vec3, mode: JacobianMode) -> Result<Vec3> {
    Ok(jinv(phi, mode)? * omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * scale
    }

    fn random_phi(rng: &mut ChaCha8Rng, max_angle: f64) -> RotationVector {
        let axis = random_vec(rng, 1.0).normalize();
        RotationVector::new(axis * rng.random_range(0.0..max_angle))
    }

    /// Direct Bortz expansion, independent of the matrix form.
    fn bortz_expanded(phi: &Vec3, omega: &Vec3) -> Vec3 {
        let a = phi.norm();
        let c = if a == 0.0 {
            1.0 / 12.0
        } else {
            (1.0 / (a * a)) * (1.0 - a * a.sin() / (2.0 * (1.0 - a.cos())))
        };
        omega + phi.cross(omega) * 0.5 + phi.cross(&phi.cross(omega)) * c
    }

    #[test]
    fn coefficient_limits() {
        assert_eq!(jinv_coefficient(0.0).unwrap(), 1.0 / 12.0);
        let at_pi = jinv_coefficient(PI).unwrap();
        assert!((at_pi - 1.0 / (PI * PI)).abs() <= 1e-15);
    }

    #[test]
    fn coefficient_is_continuous_across_branches() {
        let delta = 1e-9;
        let below = jinv_coefficient(SERIES_THRESHOLD - delta).unwrap();
        let above = jinv_coefficient(SERIES_THRESHOLD + delta).unwrap();
        assert!((below - above).abs() <= 1e-12, "{below} vs {above}");
    }

    #[test]
    fn coefficient_series_matches_closed_form_where_both_are_accurate() {
        for a in [0.3f64, 0.4, 0.49, 0.6] {
            let half = 0.5 * a;
            let closed = (1.0 - half * half.cos() / half.sin()) / (a * a);
            assert!((jinv_coefficient(a).unwrap() - closed).abs() <= 1e-14);
        }
    }

    #[test]
    fn coefficient_domain() {
        assert!(jinv_coefficient(-1e-3).is_err());
        assert!(jinv_coefficient(2.0 * PI).is_err());
        assert!(jinv_coefficient(f64::NAN).is_err());
        assert!(jinv_coefficient(MAX_JACOBIAN_ANGLE - 1e-6).is_ok());
    }

    #[test]
    fn jinv_at_zero_is_identity() {
        for mode in [
            JacobianMode::ExactClosedForm,
            JacobianMode::ThirdOrderApprox,
        ] {
            assert_eq!(
                jinv(&RotationVector::zero(), mode).unwrap(),
                Mat3::identity()
            );
        }
    }

    #[test]
    fn approx_mode_close_for_small_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let axis = random_vec(&mut rng, 1.0).normalize();
            let phi = RotationVector::new(axis * 0.1);
            let exact = jinv(&phi, JacobianMode::ExactClosedForm).unwrap();
            let approx = jinv(&phi, JacobianMode::ThirdOrderApprox).unwrap();
            assert!((exact - approx).norm() <= 2e-6);
            let c = jinv_coefficient(phi.angle()).unwrap();
            let bound = (c - 1.0 / 12.0).abs() * phi.angle().powi(2);
            assert!((exact - approx).amax() <= bound + 1e-16);
        }
    }

    #[test]
    fn exact_jinv_minus_linear_part_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let phi = random_phi(&mut rng, 3.0);
            let m = jinv(&phi, JacobianMode::ExactClosedForm).unwrap()
                - Mat3::identity()
                - wedge(&phi.vector()) * 0.5;
            assert!((m - m.transpose()).norm() <= 1e-15);
        }
    }

    #[test]
    fn forward_jacobian_inverts_jinv() {
        assert_eq!(
            forward_jacobian(&RotationVector::zero()).unwrap(),
            Mat3::identity()
        );
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let phi = random_phi(&mut rng, 3.0);
            let j = forward_jacobian(&phi).unwrap();
            let inv = jinv(&phi, JacobianMode::ExactClosedForm).unwrap();
            assert!((j * inv - Mat3::identity()).norm() <= 1e-12);
            let omega = random_vec(&mut rng, 2.0);
            assert!((j * (inv * omega) - omega).norm() <= 1e-12 * omega.norm().max(1.0));
        }
    }

    #[test]
    fn forward_jacobian_matches_finite_difference_of_exp() {
        // omega = J phi_dot where S(t) = exp([phi(t) x]) obeys S_dot = S [omega x].
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let phi = random_phi(&mut rng, 2.5).vector();
            let rate = random_vec(&mut rng, 1.0);
            let h = 1e-5;
            let t_plus = crate::so3::dcm_from_rotation_vector(&(phi + rate * h).into());
            let t_minus = crate::so3::dcm_from_rotation_vector(&(phi - rate * h).into());
            // T = S^T, so T_dot T^T = -[omega x]
            let t_mid = crate::so3::dcm_from_rotation_vector(&phi.into());
            let derivative = (t_plus.matrix() - t_minus.matrix()) / (2.0 * h);
            let omega_skew = -(derivative * t_mid.matrix().transpose());
            let omega = crate::so3::vee_with_tolerance(&omega_skew, 1e-8).unwrap();
            let j = forward_jacobian(&phi.into()).unwrap();
            assert!((j * rate - omega).norm() <= 1e-8);
        }
    }

    #[test]
    fn rhs_examples() {
        let omega = Vec3::new(0.3, -0.7, 1.1);
        for mode in [
            JacobianMode::ExactClosedForm,
            JacobianMode::ThirdOrderApprox,
        ] {
            assert_eq!(
                bortz_rhs(&RotationVector::zero(), &omega, mode).unwrap(),
                omega
            );
            let parallel = RotationVector::new(omega * 0.8);
            let out = bortz_rhs(&parallel, &omega, mode).unwrap();
            assert!((out - omega).norm() <= 1e-15);
        }
    }

    #[test]
    fn rhs_matches_bortz_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut worst = 0.0;
        for _ in 0..10_000 {
            // the naive coefficient loses digits to cancellation below ~0.3 rad
            let axis = random_vec(&mut rng, 1.0).normalize();
            let phi = RotationVector::new(axis * rng.random_range(0.3..3.0));
            let omega = random_vec(&mut rng, 2.0);
            let matrix_form = bortz_rhs(&phi, &omega, JacobianMode::ExactClosedForm).unwrap();
            let expanded = bortz_expanded(&phi.vector(), &omega);
            worst = f64::max(
                worst,
                (matrix_form - expanded).norm() / omega.norm().max(1.0),
            );
        }
        assert!(worst <= 1e-14, "worst {worst:e}");
    }
}
