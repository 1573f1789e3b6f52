//! Explicit Runge-Kutta steps driven by Butcher tableaux, and their use for
//! integrating one attitude increment from a zero rotation vector.

use crate::bortz::{bortz_rhs, JacobianMode};
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::so3::{RotationVector, Vec3};

const TABLEAU_TOLERANCE: f64 = 1e-14;

/// Coefficients `(A, b, c)` of an explicit Runge-Kutta scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    /// Row-major `n x n`, strictly lower triangular.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// One failed tableau invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum TableauViolation {
    ShapeMismatch { stages: usize, detail: String },
    NotExplicit { row: usize, col: usize, value: f64 },
    WeightSum { sum: f64 },
    RowSum { stage: usize, c: f64, row_sum: f64 },
    FirstNodeNonZero { c0: f64 },
}

impl std::fmt::Display for TableauViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TableauViolation::ShapeMismatch { stages, detail } => {
                write!(f, "shape mismatch for {stages} stages: {detail}")
            }
            TableauViolation::NotExplicit { row, col, value } => {
                write!(f, "A[{row}][{col}] = {value} on or above the diagonal")
            }
            TableauViolation::WeightSum { sum } => write!(f, "weights sum to {sum}, not 1"),
            TableauViolation::RowSum { stage, c, row_sum } => {
                write!(f, "stage {stage}: c = {c} but row sum of A = {row_sum}")
            }
            TableauViolation::FirstNodeNonZero { c0 } => write!(f, "c[0] = {c0}, expected 0"),
        }
    }
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }
}

pub fn tableau_forward_euler() -> ButcherTableau {
    ButcherTableau {
        name: "forward-euler",
        a: vec![vec![0.0]],
        b: vec![1.0],
        c: vec![0.0],
    }
}

pub fn tableau_explicit_midpoint() -> ButcherTableau {
    ButcherTableau {
        name: "explicit-midpoint",
        a: vec![vec![0.0, 0.0], vec![0.5, 0.0]],
        b: vec![0.0, 1.0],
        c: vec![0.0, 0.5],
    }
}

/// Kutta's third-order method.
pub fn tableau_rk3() -> ButcherTableau {
    ButcherTableau {
        name: "rk3",
        a: vec![
            vec![0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0],
            vec![-1.0, 2.0, 0.0],
        ],
        b: vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        c: vec![0.0, 0.5, 1.0],
    }
}

/// The classical fourth-order method.
pub fn tableau_rk4() -> ButcherTableau {
    ButcherTableau {
        name: "rk4",
        a: vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ],
        b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        c: vec![0.0, 0.5, 0.5, 1.0],
    }
}

pub fn builtin_tableaux() -> Vec<ButcherTableau> {
    vec![
        tableau_forward_euler(),
        tableau_explicit_midpoint(),
        tableau_rk3(),
        tableau_rk4(),
    ]
}

/// Checks every tableau invariant and reports all violations found.
pub fn validate_tableau(t: &ButcherTableau) -> std::result::Result<(), Vec<TableauViolation>> {
    let n = t.b.len();
    let mut violations = Vec::new();
    if n == 0 || t.c.len() != n || t.a.len() != n || t.a.iter().any(|row| row.len() != n) {
        violations.push(TableauViolation::ShapeMismatch {
            stages: n,
            detail: format!(
                "b has {}, c has {}, A has {} rows of lengths {:?}",
                n,
                t.c.len(),
                t.a.len(),
                t.a.iter().map(Vec::len).collect::<Vec<_>>()
            ),
        });
        return Err(violations);
    }
    for (row, coeffs) in t.a.iter().enumerate() {
        for (col, &value) in coeffs.iter().enumerate().skip(row) {
            if value != 0.0 {
                violations.push(TableauViolation::NotExplicit { row, col, value });
            }
        }
    }
    let sum: f64 = t.b.iter().sum();
    if (sum - 1.0).abs() > TABLEAU_TOLERANCE {
        violations.push(TableauViolation::WeightSum { sum });
    }
    if t.c[0] != 0.0 {
        violations.push(TableauViolation::FirstNodeNonZero { c0: t.c[0] });
    }
    for (stage, (row, &c)) in t.a.iter().zip(&t.c).enumerate() {
        let row_sum: f64 = row.iter().sum();
        if (row_sum - c).abs() > TABLEAU_TOLERANCE {
            violations.push(TableauViolation::RowSum { stage, c, row_sum });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// One explicit Runge-Kutta step of `y' = f(t, y)` from `(t_k, y_k)`.
///
/// Stage values are `psi_v = y_k + sum_{l<v} A[v][l] f_l` with
/// `f_v = dt * f(t_k + dt c_v, psi_v)`; the result is `y_k + sum_l b_l f_l`.
/// Errors from `f` are wrapped with the (zero-based) stage index.
pub fn rk_step<F>(
    mut f: F,
    t_k: f64,
    y_k: &[f64],
    dt: f64,
    tab: &ButcherTableau,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::DegenerateStep { dt });
    }
    if let Err(violations) = validate_tableau(tab) {
        let detail: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::Config(format!(
            "invalid tableau {}: {}",
            tab.name,
            detail.join("; ")
        )));
    }
    let m = y_k.len();
    let mut slopes: Vec<Vec<f64>> = Vec::with_capacity(tab.stages());
    let mut psi = vec![0.0; m];
    for (stage, (row, &c)) in tab.a.iter().zip(&tab.c).enumerate() {
        psi.copy_from_slice(y_k);
        for (coeff, slope) in row.iter().zip(&slopes) {
            if *coeff != 0.0 {
                for (p, s) in psi.iter_mut().zip(slope) {
                    *p += coeff * s;
                }
            }
        }
        let mut value = f(t_k + dt * c, &psi).map_err(|source| Error::Stage {
            stage,
            source: Box::new(source),
        })?;
        if value.len() != m {
            return Err(Error::Stage {
                stage,
                source: Box::new(Error::Config(format!(
                    "ode returned dimension {}, expected {m}",
                    value.len()
                ))),
            });
        }
        value.iter_mut().for_each(|v| *v *= dt);
        slopes.push(value);
    }
    // Compensated accumulation: the update is rounded once instead of once
    // per stage.
    let mut update = vec![Dd::ZERO; m];
    for (weight, slope) in tab.b.iter().zip(&slopes) {
        for (acc, s) in update.iter_mut().zip(slope) {
            *acc = *acc + Dd::product(*weight, *s);
        }
    }
    Ok(y_k
        .iter()
        .zip(&update)
        .map(|(y, d)| (Dd::from(*y) + *d).to_f64())
        .collect())
}

/// Integrates the rotation-vector ODE over `[t_k, t_k + dt]` starting from
/// `phi = 0` and returns the increment `delta_phi`.
pub fn integrate_attitude_step<S>(
    mut sampler: S,
    t_k: f64,
    dt: f64,
    tab: &ButcherTableau,
    mode: JacobianMode,
) -> Result<RotationVector>
where
    S: FnMut(f64) -> Result<Vec3>,
{
    let ode = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let phi = RotationVector::from_components(y[0], y[1], y[2]);
        let omega = sampler(t)?;
        let rate = bortz_rhs(&phi, &omega, mode)?;
        Ok(vec![rate.x, rate.y, rate.z])
    };
    let y = rk_step(ode, t_k, &[0.0; 3], dt, tab)?;
    Ok(RotationVector::from_components(y[0], y[1], y[2]))
}

/// Second-order expansion of the RK3 increment in the three rate samples,
/// `(dt/6)(w0 + 4 wm + w1) + (dt^2/6)(w0 - w1) x wm + (dt^2/12) w1 x w0`.
pub fn delta_phi_rk3_closed(
    omega0: &Vec3,
    omega_mid: &Vec3,
    omega1: &Vec3,
    dt: f64,
) -> RotationVector {
    let simpson = (omega0 + omega_mid * 4.0 + omega1) * (dt / 6.0);
    let cross = (omega0 - omega1).cross(omega_mid) * (dt * dt / 6.0)
        + omega1.cross(omega0) * (dt * dt / 12.0);
    RotationVector::new(simpson + cross)
}

/// Second-order expansion of the RK4 increment in the three rate samples,
/// `(dt/6)(w0 + 4 wm + w1) + (dt^2/12)(w0 - w1) x wm`.
pub fn delta_phi_rk4_closed(
    omega0: &Vec3,
    omega_mid: &Vec3,
    omega1: &Vec3,
    dt: f64,
) -> RotationVector {
    let simpson = (omega0 + omega_mid * 4.0 + omega1) * (dt / 6.0);
    RotationVector::new(simpson + rk4_closed_cross_term(omega0, omega_mid, omega1, dt))
}

/// Non-commutative part of [`delta_phi_rk4_closed`], `(dt^2/12)(w0 - w1) x wm`.
pub fn rk4_closed_cross_term(omega0: &Vec3, omega_mid: &Vec3, omega1: &Vec3, dt: f64) -> Vec3 {
    (omega0 - omega1).cross(omega_mid) * (dt * dt / 12.0)
}
