//! Asymptotic speed from the fixed point
//! `xi(x) = sum_y H(x, y) rho(y) xi(y) + 1 + 1 / rho(x)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::envmodel::{stationary_distribution, EnvironmentSpec};
use crate::error::{Result, RwreError};
use crate::linalg::sup_norm;
use crate::spectral;
use crate::stats;

/// `Lambda(1)` at or above `-ZERO_SPEED_TOL` is treated as `kappa <= 1`.
pub const ZERO_SPEED_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct SpeedReport {
    pub kappa: f64,
    pub v_p: f64,
    pub xi: Option<Vec<f64>>,
    /// `E_pi(rho xi)`; infinite when the speed is zero.
    pub inverse_speed: f64,
}

/// Solves `(I - H diag(rho)) xi = 1 + 1 / rho` directly, with one round of
/// residual correction.
pub fn solve_xi(spec: &EnvironmentSpec) -> Result<Vec<f64>> {
    let l1 = spectral::lambda(spec, 1.0)?;
    if l1 >= -ZERO_SPEED_TOL {
        return Err(RwreError::ZeroSpeed(l1));
    }
    let k = spec.len();
    let rho = spec.rho();
    let h1 = DMatrix::from_fn(k, k, |x, y| spec.transition()[(x, y)] * rho[y]);
    let a = DMatrix::identity(k, k) - &h1;
    let rhs = DVector::from_fn(k, |x, _| 1.0 + 1.0 / rho[x]);
    let lu = a.clone().lu();
    let mut xi = lu.solve(&rhs).ok_or_else(|| RwreError::Numerical("I - H diag(rho) is singular".into()))?;
    if let Some(corr) = lu.solve(&(&rhs - &a * &xi)) {
        xi += corr;
    }
    let resid = sup_norm((&xi - (&h1 * &xi + &rhs)).iter().copied());
    if resid >= RESIDUAL_TOL * sup_norm(xi.iter().copied()).max(1.0) {
        return Err(RwreError::Numerical(format!("xi residual {resid:e}")));
    }
    if xi.iter().any(|&v| v <= 0.0) {
        return Err(RwreError::Numerical(format!("xi not positive: {xi:?}")));
    }
    Ok(xi.iter().copied().collect())
}

/// `v_P = 0` when `kappa <= 1`, else `1 / E_pi(rho xi)`. When `Lambda`
/// stays negative on the whole probe grid (for instance `rho < 1`
/// everywhere) the reported `kappa` is infinite.
pub fn speed(spec: &EnvironmentSpec) -> Result<SpeedReport> {
    let kappa = match spectral::solve_kappa(spec) {
        Ok(rep) => rep.kappa,
        Err(RwreError::NoKappa(msg)) => {
            if spectral::lambda(spec, 1.0)? < -ZERO_SPEED_TOL
                && spectral::lambda(spec, *crate::envmodel::probe_grid().last().unwrap())? < 0.0
            {
                f64::INFINITY
            } else {
                return Err(RwreError::NoKappa(msg));
            }
        }
        Err(e) => return Err(e),
    };
    speed_with_kappa(spec, kappa)
}

pub fn speed_with_kappa(spec: &EnvironmentSpec, kappa: f64) -> Result<SpeedReport> {
    match solve_xi(spec) {
        Ok(xi) => {
            let pi = stationary_distribution(spec.transition())?;
            let inverse_speed: f64 = (0..spec.len()).map(|x| pi[x] * spec.rho()[x] * xi[x]).sum();
            Ok(SpeedReport { kappa, v_p: 1.0 / inverse_speed, xi: Some(xi), inverse_speed })
        }
        Err(RwreError::ZeroSpeed(_)) => {
            Ok(SpeedReport { kappa, v_p: 0.0, xi: None, inverse_speed: f64::INFINITY })
        }
        Err(e) => Err(e),
    }
}

/// Compares `1 / v_P` with `2 mean(R) - 1`.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedCrossCheck {
    pub inverse_speed: f64,
    pub estimate: f64,
    pub standard_error: f64,
    pub z: f64,
    pub consistent: bool,
}

pub fn speed_cross_check(report: &SpeedReport, r_samples: &[f64]) -> Result<SpeedCrossCheck> {
    if report.v_p == 0.0 {
        return Err(RwreError::OutOfScope("speed is zero; E(R) is infinite".into()));
    }
    if r_samples.len() < 2 {
        return Err(RwreError::InsufficientData("need R samples".into()));
    }
    let (mean, se) = stats::mean_and_se(r_samples);
    let estimate = 2.0 * mean - 1.0;
    let standard_error = 2.0 * se;
    let z = (estimate - report.inverse_speed) / standard_error;
    Ok(SpeedCrossCheck {
        inverse_speed: report.inverse_speed,
        estimate,
        standard_error,
        z,
        consistent: z.abs() <= 4.0,
    })
}
