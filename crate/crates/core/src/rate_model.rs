//! Polynomial angular-rate models reconstructed from integrated-rate
//! increments, and their samples at the Runge-Kutta nodes.
//!
//! Time is measured from `t_k`, the start of the step being propagated. The
//! increment at alignment index `a` spans `[0, dt]`, the one before it spans
//! `[-dt, 0]`, the one after it `[dt, 2 dt]`, and so on. Coefficients are
//! stored in increasing power: `omega(t) = sum_i p_i (t - t_k)^i`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::so3::Vec3;

/// Largest design-matrix condition estimate accepted by [`fit_polynomial`].
pub const MAX_CONDITION: f64 = 1e12;

/// Consecutive integrated-rate increments sharing one sample interval.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementWindow {
    increments: Vec<Vec3>,
    dt: f64,
    current: usize,
}

impl MeasurementWindow {
    /// Window whose second increment is the step being propagated.
    pub fn new(increments: Vec<Vec3>, dt: f64) -> Result<Self> {
        Self::with_alignment(increments, dt, 1)
    }

    pub fn with_alignment(increments: Vec<Vec3>, dt: f64, current: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::DegenerateStep { dt });
        }
        if increments.len() < 2 {
            return Err(Error::InvalidWindow(format!(
                "need at least 2 increments, got {}",
                increments.len()
            )));
        }
        if current >= increments.len() {
            return Err(Error::InvalidWindow(format!(
                "alignment index {current} outside window of {}",
                increments.len()
            )));
        }
        Ok(Self {
            increments,
            dt,
            current,
        })
    }

    /// `(dtheta_{k-1}, dtheta_k)`.
    pub fn theta2(prev: Vec3, curr: Vec3, dt: f64) -> Result<Self> {
        Self::new(vec![prev, curr], dt)
    }

    /// `(dtheta_{k-1}, dtheta_k, dtheta_{k+1})`.
    pub fn theta3(prev: Vec3, curr: Vec3, next: Vec3, dt: f64) -> Result<Self> {
        Self::new(vec![prev, curr, next], dt)
    }

    pub fn increments(&self) -> &[Vec3] {
        &self.increments
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn current_index(&self) -> usize {
        self.current
    }

    /// The increment over `[t_k, t_k + dt]`.
    pub fn current(&self) -> Vec3 {
        self.increments[self.current]
    }

    /// Span of increment `j` in units of `dt`, relative to `t_k`.
    pub fn span(&self, j: usize) -> (f64, f64) {
        let start = j as f64 - self.current as f64;
        (start, start + 1.0)
    }

    fn expect_shape(&self, len: usize) -> Result<()> {
        if self.increments.len() != len || self.current != 1 {
            return Err(Error::InvalidWindow(format!(
                "expected {len} increments aligned at index 1, got {} aligned at {}",
                self.increments.len(),
                self.current
            )));
        }
        Ok(())
    }
}

/// `omega(t) = sum_i coeffs[i] (t - origin)^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePolynomial {
    pub coeffs: Vec<Vec3>,
    pub origin: f64,
}

impl RatePolynomial {
    pub fn new(coeffs: Vec<Vec3>, origin: f64) -> Self {
        Self { coeffs, origin }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// Rate samples at `t_k`, `t_k + dt/2` and `t_k + dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkNodeSamples {
    pub omega0: Vec3,
    pub omega_mid: Vec3,
    pub omega1: Vec3,
}

/// Affine model from `(dtheta_{k-1}, dtheta_k)`.
pub fn fit_affine(w: &MeasurementWindow) -> Result<RatePolynomial> {
    w.expect_shape(2)?;
    let (prev, curr, dt) = (w.increments[0], w.increments[1], w.dt);
    Ok(RatePolynomial::new(
        vec![(prev + curr) / (2.0 * dt), (curr - prev) / (dt * dt)],
        0.0,
    ))
}

/// Quadratic model from `(dtheta_{k-1}, dtheta_k, dtheta_{k+1})`.
pub fn fit_quadratic(w: &MeasurementWindow) -> Result<RatePolynomial> {
    w.expect_shape(3)?;
    let (a, b, c, dt) = (w.increments[0], w.increments[1], w.increments[2], w.dt);
    // Inverse of the span-integral matrix
    //   [1 -1/2 1/3; 1 1/2 1/3; 1 3/2 7/3]
    // written out per coefficient.
    Ok(RatePolynomial::new(
        vec![
            (a * 2.0 + b * 5.0 - c) / (6.0 * dt),
            (b - a) / (dt * dt),
            (a - b * 2.0 + c) / (2.0 * dt * dt * dt),
        ],
        0.0,
    ))
}

/// Degree `Q - 1` model interpolating all `Q` increments in the integral sense.
///
/// Row `j` of the design matrix holds the integrals of `1, s, .., s^(Q-1)` over
/// the span of increment `j`, with time scaled by `dt`. The system is solved
/// by LU with partial pivoting.
pub fn fit_polynomial(w: &MeasurementWindow) -> Result<RatePolynomial> {
    let q = w.len();
    let design = DMatrix::from_fn(q, q, |j, i| {
        let (a, b) = w.span(j);
        let p = (i + 1) as i32;
        (b.powi(p) - a.powi(p)) / p as f64
    });
    let lu = PivotedLu::factor(&design)?;
    let condition = lu.condition_estimate(&design);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let mut scaled = vec![Vec3::zeros(); q];
    for axis in 0..3 {
        let rhs: Vec<f64> = w.increments.iter().map(|v| v[axis]).collect();
        for (i, value) in lu.solve(&rhs).into_iter().enumerate() {
            scaled[i][axis] = value;
        }
    }
    // undo the time scaling: p_i = q_i / dt^(i+1)
    let coeffs = scaled
        .into_iter()
        .enumerate()
        .map(|(i, c)| c / w.dt.powi(i as i32 + 1))
        .collect();
    Ok(RatePolynomial::new(coeffs, 0.0))
}

/// Horner evaluation at `t`.
pub fn eval_rate(model: &RatePolynomial, t: f64) -> Vec3 {
    let s = t - model.origin;
    model
        .coeffs
        .iter()
        .rev()
        .fold(Vec3::zeros(), |acc, c| acc * s + c)
}

/// Samples of the affine model at the three RK nodes.
pub fn rk_node_samples_affine(w: &MeasurementWindow) -> Result<RkNodeSamples> {
    w.expect_shape(2)?;
    let (prev, curr, dt) = (w.increments[0], w.increments[1], w.dt);
    Ok(RkNodeSamples {
        omega0: (prev + curr) / (2.0 * dt),
        omega_mid: curr / dt,
        omega1: (curr * 3.0 - prev) / (2.0 * dt),
    })
}

/// Samples of the quadratic model at the three RK nodes,
/// `Omega^T = 1/(24 dt) [8 20 -4; -1 26 -1; -4 20 8] Theta_3^T`.
pub fn rk_node_samples_quadratic(w: &MeasurementWindow) -> Result<RkNodeSamples> {
    w.expect_shape(3)?;
    let (a, b, c) = (w.increments[0], w.increments[1], w.increments[2]);
    let scale = 1.0 / (24.0 * w.dt);
    Ok(RkNodeSamples {
        omega0: (a * 8.0 + b * 20.0 - c * 4.0) * scale,
        omega_mid: (-a + b * 26.0 - c) * scale,
        omega1: (-a * 4.0 + b * 20.0 + c * 8.0) * scale,
    })
}

/// Rows `(1, t, .., t^(Q-1))`, increasing power to match [`RatePolynomial`].
pub fn vandermonde_rows(times: &[f64], q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(times.len(), q, |r, c| times[r].powi(c as i32))
}

/// Dense LU factorization with row pivoting.
struct PivotedLu {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl PivotedLu {
    fn factor(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&a, &b| lu[(a, k)].abs().total_cmp(&lu[(b, k)].abs()))
                .unwrap_or(k);
            if lu[(pivot, k)] == 0.0 || !lu[(pivot, k)].is_finite() {
                return Err(Error::SingularSystem {
                    condition: f64::INFINITY,
                });
            }
            if pivot != k {
                lu.swap_rows(pivot, k);
                perm.swap(pivot, k);
            }
            for r in k + 1..n {
                let factor = lu[(r, k)] / lu[(k, k)];
                lu[(r, k)] = factor;
                for c in k + 1..n {
                    lu[(r, c)] -= factor * lu[(k, c)];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for r in 0..n {
            for c in 0..r {
                x[r] -= self.lu[(r, c)] * x[c];
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                x[r] -= self.lu[(r, c)] * x[c];
            }
            x[r] /= self.lu[(r, r)];
        }
        x
    }

    /// `|M|_1 |M^-1|_1` with the inverse formed column by column.
    fn condition_estimate(&self, m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        let one_norm = |cols: &dyn Fn(usize) -> Vec<f64>| {
            (0..n)
                .map(|c| cols(c).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let norm_m = one_norm(&|c| m.column(c).iter().copied().collect());
        let norm_inv = one_norm(&|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            self.solve(&e)
        });
        norm_m * norm_inv
    }
}
