//! Convergence study: propagate each method over a horizon at several step
//! sizes, compare against the reference attitude and fit observed orders.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use crate::bortz::JacobianMode;
use crate::coning::{miller_single_speed, rk4_theta2, rk4_theta3, two_speed_classic};
use crate::error::{Error, Result};
use crate::rate_model::MeasurementWindow;
use crate::rk::{
    integrate_attitude_step, tableau_explicit_midpoint, tableau_forward_euler, tableau_rk3,
    tableau_rk4, ButcherTableau,
};
use crate::so3::{
    attitude_error_angle, compose, dcm_from_rotation_vector, orthonormalize, Dcm, RotationVector,
    Vec3,
};
use crate::trajectory::{
    omega_at, reference_attitude, synth_delta_theta_default, AnalyticAttitudeSignal,
    MIN_REFERENCE_TOLERANCE,
};

pub const ORTHONORMALIZE_EVERY: usize = 1000;
pub const DIVISIBILITY_TOLERANCE: f64 = 1e-9;
/// Errors at or below this are treated as roundoff and left out of fits.
pub const ERROR_FLOOR: f64 = 1e-14;
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    FwdEulerOmega,
    ExMidOmega,
    Rk3Omega,
    Rk4Omega,
    SingleSpeedTheta2,
    SingleSpeedTheta3,
    /// `m` sensor increments per step.
    TwoSpeedClassic {
        m: usize,
    },
    Rk4Theta2,
}

impl MethodId {
    pub const FIXED: [MethodId; 7] = [
        MethodId::FwdEulerOmega,
        MethodId::ExMidOmega,
        MethodId::Rk3Omega,
        MethodId::Rk4Omega,
        MethodId::SingleSpeedTheta2,
        MethodId::SingleSpeedTheta3,
        MethodId::Rk4Theta2,
    ];

    /// Accepted spellings, for error messages.
    pub fn valid_names() -> String {
        let mut names: Vec<String> = Self::FIXED.iter().map(|m| m.to_string()).collect();
        names.push("twospeed<m> (m >= 1)".into());
        names.join(", ")
    }

    pub fn parse(name: &str) -> Option<MethodId> {
        let lower = name.trim().to_ascii_lowercase();
        if let Some(m) = Self::FIXED.iter().find(|m| m.to_string() == lower) {
            return Some(*m);
        }
        let m: usize = lower.strip_prefix("twospeed")?.parse().ok()?;
        (m >= 1).then_some(MethodId::TwoSpeedClassic { m })
    }

    /// Driven by instantaneous rate samples rather than increments.
    pub fn uses_rate_samples(&self) -> bool {
        matches!(
            self,
            MethodId::FwdEulerOmega
                | MethodId::ExMidOmega
                | MethodId::Rk3Omega
                | MethodId::Rk4Omega
        )
    }

    fn tableau(&self) -> Option<ButcherTableau> {
        match self {
            MethodId::FwdEulerOmega => Some(tableau_forward_euler()),
            MethodId::ExMidOmega => Some(tableau_explicit_midpoint()),
            MethodId::Rk3Omega => Some(tableau_rk3()),
            MethodId::Rk4Omega => Some(tableau_rk4()),
            _ => None,
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodId::FwdEulerOmega => f.write_str("fwdeuleromega"),
            MethodId::ExMidOmega => f.write_str("exmidomega"),
            MethodId::Rk3Omega => f.write_str("rk3omega"),
            MethodId::Rk4Omega => f.write_str("rk4omega"),
            MethodId::SingleSpeedTheta2 => f.write_str("theta2"),
            MethodId::SingleSpeedTheta3 => f.write_str("theta3"),
            MethodId::TwoSpeedClassic { m } => write!(f, "twospeed{m}"),
            MethodId::Rk4Theta2 => f.write_str("rk4theta2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub signal: AnalyticAttitudeSignal,
    pub methods: Vec<MethodId>,
    /// Strictly decreasing.
    pub step_sizes: Vec<f64>,
    pub horizon: f64,
    pub tolerance: f64,
    pub jacobian: JacobianMode,
    /// When false every `wall_time` is written as 0 so reports compare bitwise.
    pub record_timing: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.step_sizes.is_empty() {
            return Err(Error::Config("no step sizes selected".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.tolerance >= MIN_REFERENCE_TOLERANCE) {
            return Err(Error::Config(format!(
                "tolerance must be at least {MIN_REFERENCE_TOLERANCE:e}, got {:e}",
                self.tolerance
            )));
        }
        for pair in self.step_sizes.windows(2) {
            if !(pair[1] < pair[0]) {
                return Err(Error::Config(format!(
                    "step sizes must be strictly decreasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        for dt in &self.step_sizes {
            step_count(*dt, self.horizon)?;
        }
        Ok(())
    }
}

/// `dt_max * 2^-k` for `k = 0..=halvings`.
pub fn halving_steps(dt_max: f64, halvings: u32) -> Vec<f64> {
    (0..=halvings)
        .map(|k| dt_max * 0.5f64.powi(k as i32))
        .collect()
}

fn step_count(dt: f64, horizon: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!(
            "step size must be positive, got {dt}"
        )));
    }
    let steps = (horizon / dt).round();
    if steps < 1.0 || (steps * dt - horizon).abs() > DIVISIBILITY_TOLERANCE {
        return Err(Error::Config(format!(
            "step size {dt} does not divide the horizon {horizon}"
        )));
    }
    Ok(steps as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub method: MethodId,
    pub jacobian_mode: JacobianMode,
    pub dt: f64,
    pub steps: usize,
    pub final_error_angle: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderEstimate {
    pub slope: f64,
    /// RMS deviation of `log(error)` from the fitted line.
    pub residual: f64,
    /// Records that survived the noise-floor filter.
    pub used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodFit {
    pub method: MethodId,
    pub estimate: Result<OrderEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub records: Vec<ErrorRecord>,
    pub fits: Vec<MethodFit>,
}

impl ConvergenceReport {
    pub fn records_for(&self, method: MethodId) -> impl Iterator<Item = &ErrorRecord> {
        self.records.iter().filter(move |r| r.method == method)
    }

    pub fn slope(&self, method: MethodId) -> Option<f64> {
        self.fits
            .iter()
            .find(|f| f.method == method)
            .and_then(|f| f.estimate.as_ref().ok())
            .map(|e| e.slope)
    }
}

/// Rolling supply of exact increments `dtheta_k` over `[k dt, (k+1) dt]`.
struct IncrementStream<'a> {
    signal: &'a AnalyticAttitudeSignal,
    dt: f64,
}

impl IncrementStream<'_> {
    fn get(&self, k: i64) -> Result<Vec3> {
        let t0 = k as f64 * self.dt;
        let t1 = (k + 1) as f64 * self.dt;
        synth_delta_theta_default(self.signal, t0, t1)
    }
}

/// Attitude change over `[0, horizon]` produced by `method` at step `dt`.
pub fn propagate(
    method: MethodId,
    mode: JacobianMode,
    signal: &AnalyticAttitudeSignal,
    dt: f64,
    horizon: f64,
) -> Result<Dcm> {
    signal.validate()?;
    let steps = step_count(dt, horizon)?;
    if let MethodId::TwoSpeedClassic { m: 0 } = method {
        return Err(Error::Config(
            "twospeed needs at least one sensor increment per step".into(),
        ));
    }
    let mut attitude = Dcm::identity();
    let mut advance = |k: usize, dphi: RotationVector| -> Result<()> {
        attitude = compose(&dcm_from_rotation_vector(&dphi), &attitude);
        if (k + 1).is_multiple_of(ORTHONORMALIZE_EVERY) {
            attitude = orthonormalize(attitude.matrix())?;
        }
        Ok(())
    };

    if let Some(tab) = method.tableau() {
        for k in 0..steps {
            let t_k = k as f64 * dt;
            let dphi = integrate_attitude_step(|t| omega_at(signal, t), t_k, dt, &tab, mode)?;
            advance(k, dphi)?;
        }
    } else if let MethodId::TwoSpeedClassic { m } = method {
        let sensor = IncrementStream {
            signal,
            dt: dt / m as f64,
        };
        let mut before = sensor.get(-1)?;
        let mut increments = Vec::with_capacity(m);
        for k in 0..steps {
            increments.clear();
            for j in 0..m {
                increments.push(sensor.get((k * m + j) as i64)?);
            }
            advance(k, two_speed_classic(&increments, &before)?)?;
            before = increments[m - 1];
        }
    } else {
        let stream = IncrementStream { signal, dt };
        let mut prev = stream.get(-1)?;
        let mut curr = stream.get(0)?;
        for k in 0..steps {
            let dphi = match method {
                MethodId::SingleSpeedTheta2 => miller_single_speed(&prev, &curr).delta_phi,
                MethodId::Rk4Theta2 => {
                    rk4_theta2(&MeasurementWindow::theta2(prev, curr, dt)?)?.delta_phi
                }
                MethodId::SingleSpeedTheta3 => {
                    let next = stream.get(k as i64 + 1)?;
                    rk4_theta3(&MeasurementWindow::theta3(prev, curr, next, dt)?)?.delta_phi
                }
                _ => unreachable!("rate-sample methods handled above"),
            };
            advance(k, dphi)?;
            if k + 1 < steps {
                prev = curr;
                curr = stream.get(k as i64 + 1)?;
            }
        }
    }
    Ok(attitude)
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let reference = reference_attitude(&cfg.signal, 0.0, cfg.horizon, cfg.tolerance)?;
    let cells: Vec<(MethodId, f64)> = cfg
        .methods
        .iter()
        .flat_map(|m| cfg.step_sizes.iter().map(move |dt| (*m, *dt)))
        .collect();
    let records = cells
        .par_iter()
        .map(|&(method, dt)| -> Result<ErrorRecord> {
            let start = Instant::now();
            let estimate = propagate(method, cfg.jacobian, &cfg.signal, dt, cfg.horizon)?;
            let elapsed = start.elapsed().as_secs_f64();
            Ok(ErrorRecord {
                method,
                jacobian_mode: cfg.jacobian,
                dt,
                steps: step_count(dt, cfg.horizon)?,
                final_error_angle: attitude_error_angle(&estimate, &reference)?,
                wall_time: if cfg.record_timing { elapsed } else { 0.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fits = Vec::with_capacity(cfg.methods.len());
    for method in &cfg.methods {
        if fits.iter().any(|f: &MethodFit| f.method == *method) {
            continue;
        }
        let rows: Vec<ErrorRecord> = records
            .iter()
            .filter(|r| r.method == *method)
            .cloned()
            .collect();
        fits.push(MethodFit {
            method: *method,
            estimate: estimate_order(&rows),
        });
    }
    Ok(ConvergenceReport { records, fits })
}

/// Least-squares slope of `log(error)` against `log(dt)`.
pub fn estimate_order(records: &[ErrorRecord]) -> Result<OrderEstimate> {
    let mut points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| {
            r.final_error_angle > ERROR_FLOOR && r.final_error_angle.is_finite() && r.dt > 0.0
        })
        .map(|r| (r.dt.ln(), r.final_error_angle.ln()))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.dedup_by(|a, b| a.0 == b.0);
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            usable: points.len(),
        });
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderEstimate {
        slope,
        residual,
        used: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_model::RatePolynomial;

    fn record(dt: f64, error: f64) -> ErrorRecord {
        ErrorRecord {
            method: MethodId::Rk4Omega,
            jacobian_mode: JacobianMode::ExactClosedForm,
            dt,
            steps: 1,
            final_error_angle: error,
            wall_time: 0.0,
        }
    }

    fn all_methods() -> Vec<MethodId> {
        let mut m = MethodId::FIXED.to_vec();
        m.push(MethodId::TwoSpeedClassic { m: 1 });
        m.push(MethodId::TwoSpeedClassic { m: 4 });
        m
    }

    #[test]
    fn method_names_round_trip() {
        for m in all_methods() {
            assert_eq!(MethodId::parse(&m.to_string()), Some(m));
        }
        assert_eq!(MethodId::parse("RK4Omega"), Some(MethodId::Rk4Omega));
        assert_eq!(MethodId::parse("twospeed0"), None);
        assert_eq!(MethodId::parse("twospeed"), None);
        assert_eq!(MethodId::parse("rk5omega"), None);
        assert!(MethodId::valid_names().contains("theta3"));
    }

    #[test]
    fn order_of_constructed_data() {
        let rows: Vec<_> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|dt| record(*dt, 3.0 * dt * dt))
            .collect();
        let fit = estimate_order(&rows).unwrap();
        assert!((fit.slope - 2.0).abs() <= 1e-12);
        assert!(fit.residual <= 1e-12);
        assert_eq!(fit.used, 4);

        let mut floored = rows.clone();
        floored.push(record(0.00625, 1e-16));
        let fit2 = estimate_order(&floored).unwrap();
        assert_eq!(fit2.slope, fit.slope);
        assert_eq!(fit2.used, 4);
    }

    #[test]
    fn order_needs_three_points() {
        let rows = vec![record(0.1, 1e-3), record(0.05, 1e-4), record(0.025, 1e-17)];
        assert_eq!(
            estimate_order(&rows),
            Err(Error::InsufficientData { usable: 2 })
        );
        let dup = vec![record(0.1, 1e-3), record(0.1, 1e-3), record(0.05, 1e-4)];
        assert_eq!(
            estimate_order(&dup),
            Err(Error::InsufficientData { usable: 2 })
        );
    }

    #[test]
    fn constant_rate_is_exact_for_every_method() {
        let s = AnalyticAttitudeSignal::constant(Vec3::new(0.4, -0.3, 0.6));
        let exact = dcm_from_rotation_vector(&RotationVector::new(Vec3::new(0.4, -0.3, 0.6) * 2.0));
        for m in all_methods() {
            for dt in [0.5, 0.125, 1.0 / 64.0] {
                let t = propagate(m, JacobianMode::ExactClosedForm, &s, dt, 2.0).unwrap();
                let e = attitude_error_angle(&t, &exact).unwrap();
                assert!(e <= 1e-12, "{m} dt {dt}: {e:e}");
            }
        }
    }

    #[test]
    fn rk4_theta2_matches_miller_propagation() {
        let s = AnalyticAttitudeSignal::preset("coning").unwrap();
        for dt in [0.125, 1.0 / 64.0] {
            let a = propagate(
                MethodId::Rk4Theta2,
                JacobianMode::ExactClosedForm,
                &s,
                dt,
                1.0,
            )
            .unwrap();
            let b = propagate(
                MethodId::SingleSpeedTheta2,
                JacobianMode::ExactClosedForm,
                &s,
                dt,
                1.0,
            )
            .unwrap();
            assert!(attitude_error_angle(&a, &b).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn twospeed_with_one_increment_is_single_speed() {
        let s = AnalyticAttitudeSignal::preset("fourier3").unwrap();
        let a = propagate(
            MethodId::TwoSpeedClassic { m: 1 },
            JacobianMode::ExactClosedForm,
            &s,
            0.0625,
            1.0,
        )
        .unwrap();
        let b = propagate(
            MethodId::SingleSpeedTheta2,
            JacobianMode::ExactClosedForm,
            &s,
            0.0625,
            1.0,
        )
        .unwrap();
        assert!(attitude_error_angle(&a, &b).unwrap() <= 1e-15);
    }

    #[test]
    fn non_dividing_step_is_rejected() {
        let s = AnalyticAttitudeSignal::preset("poly3").unwrap();
        let err = propagate(
            MethodId::Rk4Omega,
            JacobianMode::ExactClosedForm,
            &s,
            0.3,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn coning_miller_golden_value() {
        // recorded from the first run against the closed-form coning attitude
        const GOLDEN: f64 = 6.499348964120235e-12;
        let s = AnalyticAttitudeSignal::preset("coning").unwrap();
        let exact = compose(
            &crate::trajectory::exact_attitude(&s, 1.0).unwrap(),
            &crate::trajectory::exact_attitude(&s, 0.0)
                .unwrap()
                .transpose(),
        );
        let t = propagate(
            MethodId::SingleSpeedTheta2,
            JacobianMode::ExactClosedForm,
            &s,
            1e-3,
            1.0,
        )
        .unwrap();
        let e = attitude_error_angle(&t, &exact).unwrap();
        assert!((e - GOLDEN).abs() <= 0.05 * GOLDEN, "{e:e}");
    }

    fn small_config() -> SweepConfig {
        SweepConfig {
            signal: AnalyticAttitudeSignal::preset("fourier3").unwrap(),
            methods: vec![
                MethodId::Rk4Omega,
                MethodId::SingleSpeedTheta3,
                MethodId::FwdEulerOmega,
            ],
            step_sizes: halving_steps(0.25, 3),
            horizon: 1.0,
            tolerance: DEFAULT_TOLERANCE,
            jacobian: JacobianMode::ExactClosedForm,
            record_timing: false,
        }
    }

    #[test]
    fn sweep_order_and_shape() {
        let report = run_sweep(&small_config()).unwrap();
        assert_eq!(report.records.len(), 12);
        let order: Vec<(MethodId, f64)> = report.records.iter().map(|r| (r.method, r.dt)).collect();
        let expected: Vec<(MethodId, f64)> = small_config()
            .methods
            .iter()
            .flat_map(|m| halving_steps(0.25, 3).into_iter().map(move |dt| (*m, dt)))
            .collect();
        assert_eq!(order, expected);
        assert_eq!(report.fits.len(), 3);
        assert!(report.records.iter().all(|r| r.wall_time == 0.0));

        let mut single = small_config();
        single.methods = vec![MethodId::ExMidOmega];
        single.step_sizes = vec![0.125];
        assert_eq!(run_sweep(&single).unwrap().records.len(), 1);
    }

    #[test]
    fn sweep_is_independent_of_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_sweep(&small_config()).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.step_sizes = vec![0.125, 0.25];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.step_sizes = vec![0.3];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.tolerance = 1e-15;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.methods.clear();
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.signal = AnalyticAttitudeSignal::PolynomialRate(RatePolynomial::new(vec![], 0.0));
        assert!(c.validate().is_err());
    }
}
