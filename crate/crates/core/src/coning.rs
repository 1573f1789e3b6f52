//! Coning corrections computed from integrated-rate increments, plus the
//! quadrature and closed-form references used to check them.
//!
//! Every algorithm here returns `delta_phi = dtheta_k + beta`, where
//! `dtheta_k` is the increment over the step being propagated and `beta` is
//! the coning correction.

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_5, panel_edges};
use crate::rate_model::{rk_node_samples_affine, rk_node_samples_quadratic, MeasurementWindow};
use crate::rk::rk4_closed_cross_term;
use crate::so3::{RotationVector, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConingResult {
    pub delta_phi: RotationVector,
    pub beta: Vec3,
}

impl ConingResult {
    fn from_correction(dtheta: Vec3, beta: Vec3) -> Self {
        Self {
            delta_phi: RotationVector::new(dtheta + beta),
            beta,
        }
    }
}

/// Single-speed correction `beta = (1/12) dtheta_{k-1} x dtheta_k`.
pub fn miller_single_speed(dtheta_prev: &Vec3, dtheta_curr: &Vec3) -> ConingResult {
    ConingResult::from_correction(*dtheta_curr, dtheta_prev.cross(dtheta_curr) / 12.0)
}

/// RK4 closed form driven by the affine rate model. Algebraically identical
/// to [`miller_single_speed`].
///
/// The Simpson part of the closed form integrates the fitted model exactly,
/// so it is replaced by the measured increment itself and only the cross
/// term is evaluated.
pub fn rk4_theta2(window: &MeasurementWindow) -> Result<ConingResult> {
    let n = rk_node_samples_affine(window)?;
    let beta = rk4_closed_cross_term(&n.omega0, &n.omega_mid, &n.omega1, window.dt());
    Ok(ConingResult::from_correction(window.current(), beta))
}

/// RK4 closed form driven by the quadratic rate model:
/// `beta = (1/288) (dtheta_{k+1} x dtheta_{k-1} + 13 (dtheta_{k-1} - dtheta_{k+1}) x dtheta_k)`.
///
/// Needs the increment after the step, so the update lags by one interval.
pub fn rk4_theta3(window: &MeasurementWindow) -> Result<ConingResult> {
    if window.len() != 3 || window.current_index() != 1 {
        return Err(Error::InvalidWindow(format!(
            "expected 3 increments aligned at index 1, got {} aligned at {}",
            window.len(),
            window.current_index()
        )));
    }
    let inc = window.increments();
    let (prev, curr, next) = (inc[0], inc[1], inc[2]);
    let beta = (next.cross(&prev) + (prev - next).cross(&curr) * 13.0) / 288.0;
    Ok(ConingResult::from_correction(curr, beta))
}

/// Same correction as [`rk4_theta3`], assembled from the quadratic node
/// samples and the RK4 closed form.
pub fn rk4_theta3_from_nodes(window: &MeasurementWindow) -> Result<ConingResult> {
    let n = rk_node_samples_quadratic(window)?;
    let beta = rk4_closed_cross_term(&n.omega0, &n.omega_mid, &n.omega1, window.dt());
    Ok(ConingResult::from_correction(window.current(), beta))
}

/// Two-speed rotation vector over `m` sensor increments,
/// `phi_m = theta_m + 1/2 sum theta_{k-1} x dtheta_k + 1/12 sum dtheta_{k-1} x dtheta_k`,
/// with `theta` the running sum and `dtheta_0 = dtheta_before_first`.
pub fn two_speed_classic(
    increments: &[Vec3],
    dtheta_before_first: &Vec3,
) -> Result<RotationVector> {
    if increments.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let mut theta = Vec3::zeros();
    let mut running = Vec3::zeros();
    let mut pairwise = Vec3::zeros();
    let mut prev = *dtheta_before_first;
    for inc in increments {
        running += theta.cross(inc);
        pairwise += prev.cross(inc);
        theta += inc;
        prev = *inc;
    }
    Ok(RotationVector::new(theta + running * 0.5 + pairwise / 12.0))
}

/// `beta ~ 1/2 int_{t0}^{t1} theta x omega dt` with `theta(t) = int_{t0}^{t} omega`,
/// both integrals by composite 5-point Gauss-Legendre over `nodes` panels.
///
/// Reference only: costs 30 rate evaluations per panel.
pub fn goodman_robinson_beta_quadrature<S>(
    mut sampler: S,
    t0: f64,
    t1: f64,
    nodes: usize,
) -> Result<Vec3>
where
    S: FnMut(f64) -> Result<Vec3>,
{
    if !(t1 > t0) {
        return Err(Error::DegenerateStep { dt: t1 - t0 });
    }
    if nodes < 8 {
        return Err(Error::Config(format!(
            "quadrature needs at least 8 panels, got {nodes}"
        )));
    }
    let mut beta = Vec3::zeros();
    let mut theta_start = Vec3::zeros();
    for (a, b) in panel_edges(t0, t1, nodes) {
        for (tau, weight) in gauss_legendre_5(a, b) {
            let mut theta = theta_start;
            for (s, w) in gauss_legendre_5(a, tau) {
                theta += sampler(s)? * w;
            }
            beta += theta.cross(&sampler(tau)?) * (0.5 * weight);
        }
        for (s, w) in gauss_legendre_5(a, b) {
            theta_start += sampler(s)? * w;
        }
    }
    Ok(beta)
}

/// Closed-form coning integral for `omega = p1 + p2 t` on `[0, dt]`:
/// `(1/12) (p1 x p2) dt^3`.
pub fn affine_coning_oracle(p1: &Vec3, p2: &Vec3, dt: f64) -> Vec3 {
    p1.cross(p2) * (dt * dt * dt / 12.0)
}

/// Residual `|dtheta_{k-1} x dtheta_k - (p1 x p2) dt^3|` for the affine-rate
/// increments `dtheta_k = p2 dt^2/2 + p1 dt` and `dtheta_{k-1} = -p2 dt^2/2 + p1 dt`.
///
/// Evaluated in double-double arithmetic: in plain `f64` the cross product
/// of two nearly parallel increments loses about `log10(1/dt)` digits, which
/// would swamp the algebraic residual being checked.
pub fn appendix_increment_identity_check(p1: &Vec3, p2: &Vec3, dt: f64) -> f64 {
    let dt_dd = Dd::from(dt);
    let dt2 = dt_dd * dt_dd;
    let dt3 = dt2 * dt_dd;
    let half_p2: [Dd; 3] = std::array::from_fn(|i| dt2 * Dd::from(0.5 * p2[i]));
    let linear: [Dd; 3] = std::array::from_fn(|i| dt_dd * Dd::from(p1[i]));
    let curr: [Dd; 3] = std::array::from_fn(|i| linear[i] + half_p2[i]);
    let prev: [Dd; 3] = std::array::from_fn(|i| linear[i] - half_p2[i]);
    let lhs = cross_dd(&prev, &curr);
    let p1_dd = p1.map(Dd::from);
    let p2_dd = p2.map(Dd::from);
    let rhs = cross_dd(
        &[p1_dd[0], p1_dd[1], p1_dd[2]],
        &[p2_dd[0], p2_dd[1], p2_dd[2]],
    );
    (0..3)
        .map(|i| (lhs[i] - rhs[i] * dt3).to_f64())
        .map(|r| r * r)
        .sum::<f64>()
        .sqrt()
}

fn cross_dd(a: &[Dd; 3], b: &[Dd; 3]) -> [Dd; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
