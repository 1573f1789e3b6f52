//! Analytic truth signals, exact increment synthesis and reference attitudes.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::bortz::{forward_jacobian, JacobianMode};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_5, panel_edges};
use crate::rate_model::{eval_rate, RatePolynomial};
use crate::rk::{integrate_attitude_step, tableau_rk4};
use crate::so3::{
    attitude_error_angle, compose, dcm_from_rotation_vector, Dcm, RotationVector, Vec3,
};

pub const MAX_POLYNOMIAL_DEGREE: usize = 5;
pub const MAX_REFERENCE_HALVINGS: u32 = 24;
pub const MIN_REFERENCE_TOLERANCE: f64 = 1e-13;

/// One component `amplitude * sin(frequency * t + phase)`, applied per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierTerm {
    pub amplitude: Vec3,
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticAttitudeSignal {
    PolynomialRate(RatePolynomial),
    FourierRate(Vec<FourierTerm>),
    /// Rotation vector `phi(t) = alpha (cos Wt, sin Wt, 0)`.
    ConingRotationVector {
        alpha: f64,
        capital_omega: f64,
    },
}

pub const PRESET_NAMES: [&str; 3] = ["poly3", "fourier3", "coning"];

impl AnalyticAttitudeSignal {
    pub fn polynomial(model: RatePolynomial) -> Result<Self> {
        let s = AnalyticAttitudeSignal::PolynomialRate(model);
        s.validate()?;
        Ok(s)
    }

    pub fn fourier(terms: Vec<FourierTerm>) -> Result<Self> {
        let s = AnalyticAttitudeSignal::FourierRate(terms);
        s.validate()?;
        Ok(s)
    }

    pub fn coning(alpha: f64, capital_omega: f64) -> Result<Self> {
        let s = AnalyticAttitudeSignal::ConingRotationVector {
            alpha,
            capital_omega,
        };
        s.validate()?;
        Ok(s)
    }

    /// Constant body rate, handy for exactness checks.
    pub fn constant(omega: Vec3) -> Self {
        AnalyticAttitudeSignal::PolynomialRate(RatePolynomial::new(vec![omega], 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnalyticAttitudeSignal::PolynomialRate(p) => {
                if p.coeffs.is_empty() || p.degree() > MAX_POLYNOMIAL_DEGREE {
                    return Err(Error::InvalidSignal(format!(
                        "polynomial rate needs 1 to {} coefficients, got {}",
                        MAX_POLYNOMIAL_DEGREE + 1,
                        p.coeffs.len()
                    )));
                }
                let finite = p.origin.is_finite()
                    && p.coeffs.iter().all(|c| c.iter().all(|x| x.is_finite()));
                if !finite {
                    return Err(Error::InvalidSignal(
                        "polynomial rate has non-finite values".into(),
                    ));
                }
            }
            AnalyticAttitudeSignal::FourierRate(terms) => {
                for term in terms {
                    if !(term.frequency > 0.0 && term.frequency.is_finite()) {
                        return Err(Error::InvalidSignal(format!(
                            "Fourier frequency must be positive, got {}",
                            term.frequency
                        )));
                    }
                    if !term.phase.is_finite() || !term.amplitude.iter().all(|x| x.is_finite()) {
                        return Err(Error::InvalidSignal(
                            "Fourier term has non-finite values".into(),
                        ));
                    }
                }
            }
            AnalyticAttitudeSignal::ConingRotationVector {
                alpha,
                capital_omega,
            } => {
                if !(*alpha > 0.0 && *alpha < FRAC_PI_2) {
                    return Err(Error::InvalidSignal(format!(
                        "cone half-angle must lie in (0, pi/2), got {alpha}"
                    )));
                }
                if !(*capital_omega > 0.0 && capital_omega.is_finite()) {
                    return Err(Error::InvalidSignal(format!(
                        "coning frequency must be positive, got {capital_omega}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Named preset, or `None` for an unknown name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "poly3" => Some(AnalyticAttitudeSignal::PolynomialRate(RatePolynomial::new(
                vec![
                    Vec3::new(0.3, -0.2, 0.5),
                    Vec3::new(0.2, 0.4, -0.1),
                    Vec3::new(-0.1, 0.05, 0.08),
                    Vec3::new(0.01, -0.02, 0.015),
                ],
                0.0,
            ))),
            // incommensurate frequencies 1, 1.5 sqrt 2, 1.5 sqrt 3
            "fourier3" => Some(AnalyticAttitudeSignal::FourierRate(vec![
                FourierTerm {
                    amplitude: Vec3::new(0.8, 0.3, -0.2),
                    frequency: 1.0,
                    phase: 0.3,
                },
                FourierTerm {
                    amplitude: Vec3::new(-0.2, 0.7, 0.4),
                    frequency: 1.5 * 2f64.sqrt(),
                    phase: 1.1,
                },
                FourierTerm {
                    amplitude: Vec3::new(0.3, -0.1, 0.6),
                    frequency: 1.5 * 3f64.sqrt(),
                    phase: -0.7,
                },
            ])),
            "coning" => Some(AnalyticAttitudeSignal::ConingRotationVector {
                alpha: 0.05,
                capital_omega: 10.0,
            }),
            _ => None,
        }
    }

    /// Highest angular frequency present in the rate, 0 for polynomials.
    pub fn max_frequency(&self) -> f64 {
        match self {
            AnalyticAttitudeSignal::PolynomialRate(_) => 0.0,
            AnalyticAttitudeSignal::FourierRate(terms) => {
                terms.iter().map(|t| t.frequency).fold(0.0, f64::max)
            }
            AnalyticAttitudeSignal::ConingRotationVector { capital_omega, .. } => *capital_omega,
        }
    }

    fn coning_phi(alpha: f64, capital_omega: f64, t: f64) -> (Vec3, Vec3) {
        let (s, c) = (capital_omega * t).sin_cos();
        let phi = Vec3::new(alpha * c, alpha * s, 0.0);
        let phi_dot = Vec3::new(-alpha * capital_omega * s, alpha * capital_omega * c, 0.0);
        (phi, phi_dot)
    }
}

/// Body angular rate at `t`.
pub fn omega_at(signal: &AnalyticAttitudeSignal, t: f64) -> Result<Vec3> {
    if !t.is_finite() {
        return Err(Error::InvalidSignal(format!(
            "time must be finite, got {t}"
        )));
    }
    match signal {
        AnalyticAttitudeSignal::PolynomialRate(p) => Ok(eval_rate(p, t)),
        AnalyticAttitudeSignal::FourierRate(terms) => Ok(terms
            .iter()
            .map(|term| term.amplitude * (term.frequency * t + term.phase).sin())
            .sum()),
        AnalyticAttitudeSignal::ConingRotationVector {
            alpha,
            capital_omega,
        } => {
            let (phi, phi_dot) = AnalyticAttitudeSignal::coning_phi(*alpha, *capital_omega, t);
            Ok(forward_jacobian(&RotationVector::new(phi))? * phi_dot)
        }
    }
}

/// Closed-form attitude `T(phi(t))`, available only for the coning signal.
pub fn exact_attitude(signal: &AnalyticAttitudeSignal, t: f64) -> Option<Dcm> {
    match signal {
        AnalyticAttitudeSignal::ConingRotationVector {
            alpha,
            capital_omega,
        } if t.is_finite() => {
            let (phi, _) = AnalyticAttitudeSignal::coning_phi(*alpha, *capital_omega, t);
            Some(dcm_from_rotation_vector(&RotationVector::new(phi)))
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub panels_per_interval: usize,
}

impl QuadratureSpec {
    pub const POINTS_PER_PANEL: usize = 5;

    pub fn new(panels_per_interval: usize) -> Result<Self> {
        if panels_per_interval == 0 {
            return Err(Error::Config("quadrature needs at least one panel".into()));
        }
        Ok(Self {
            panels_per_interval,
        })
    }

    /// Panel count for `[t0, t1]`: about sixteen panels per period of the
    /// fastest component, never fewer than three.
    pub fn default_for(signal: &AnalyticAttitudeSignal, t0: f64, t1: f64) -> Self {
        let cycles = (t1 - t0).abs() * signal.max_frequency() / PI;
        Self {
            panels_per_interval: (8.0 * cycles).ceil() as usize + 2,
        }
    }
}

/// Exact integrated rate `int_{t0}^{t1} omega dt`.
pub fn synth_delta_theta(
    signal: &AnalyticAttitudeSignal,
    t0: f64,
    t1: f64,
    q: QuadratureSpec,
) -> Result<Vec3> {
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::DegenerateStep { dt: t1 - t0 });
    }
    let mut total = Vec3::zeros();
    for (a, b) in panel_edges(t0, t1, q.panels_per_interval) {
        for (t, w) in gauss_legendre_5(a, b) {
            total += omega_at(signal, t)? * w;
        }
    }
    Ok(total)
}

/// [`synth_delta_theta`] with the default panel count.
pub fn synth_delta_theta_default(
    signal: &AnalyticAttitudeSignal,
    t0: f64,
    t1: f64,
) -> Result<Vec3> {
    synth_delta_theta(signal, t0, t1, QuadratureSpec::default_for(signal, t0, t1))
}

fn integrate_substeps(signal: &AnalyticAttitudeSignal, t0: f64, t1: f64, n: usize) -> Result<Dcm> {
    let tab = tableau_rk4();
    let span = t1 - t0;
    let mut attitude = Dcm::identity();
    for i in 0..n {
        let a = t0 + span * (i as f64 / n as f64);
        let b = if i + 1 == n {
            t1
        } else {
            t0 + span * ((i + 1) as f64 / n as f64)
        };
        let dphi = integrate_attitude_step(
            |t| omega_at(signal, t),
            a,
            b - a,
            &tab,
            JacobianMode::ExactClosedForm,
        )?;
        attitude = compose(&dcm_from_rotation_vector(&dphi), &attitude);
    }
    Ok(attitude)
}

/// Attitude change over `[t0, t1]` (identity at `t0`) by RK4 on the
/// rotation-vector ODE, doubling the substep count until two successive
/// refinements agree within `tol`.
pub fn reference_attitude(
    signal: &AnalyticAttitudeSignal,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<Dcm> {
    signal.validate()?;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::DegenerateStep { dt: t1 - t0 });
    }
    if !(tol >= MIN_REFERENCE_TOLERANCE) {
        return Err(Error::Config(format!(
            "reference tolerance must be at least {MIN_REFERENCE_TOLERANCE:e}, got {tol:e}"
        )));
    }
    // Coarse levels may step outside the Jacobian domain; they just don't count.
    let mut previous = integrate_substeps(signal, t0, t1, 1).ok();
    let mut last_change = f64::INFINITY;
    let mut n = 1usize;
    for _ in 0..MAX_REFERENCE_HALVINGS {
        n *= 2;
        let current = match integrate_substeps(signal, t0, t1, n) {
            Ok(c) => c,
            Err(Error::AngleOutOfDomain { .. }) => {
                previous = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(prev) = &previous {
            last_change = attitude_error_angle(&current, prev)?;
            if last_change <= tol {
                check_against_exact(signal, t0, t1, &current, tol)?;
                return Ok(current);
            }
        }
        previous = Some(current);
    }
    Err(Error::NoConvergence {
        halvings: MAX_REFERENCE_HALVINGS,
        last_change,
    })
}

fn check_against_exact(
    signal: &AnalyticAttitudeSignal,
    t0: f64,
    t1: f64,
    estimate: &Dcm,
    tol: f64,
) -> Result<()> {
    if let (Some(start), Some(end)) = (exact_attitude(signal, t0), exact_attitude(signal, t1)) {
        let exact = compose(&end, &start.transpose());
        let error = attitude_error_angle(estimate, &exact)?;
        if error > 10.0 * tol {
            return Err(Error::ReferenceMismatch { error });
        }
    }
    Ok(())
}
