//! Non-seasonal ARIMA(p, d, q) estimated by Hannan–Rissanen regression.
//!
//! 1. Difference the history `d` times (`d ∈ {0, 1}`).
//! 2. Fit a long autoregression of order `min(⌊T/4⌋, 2(p+q))` by OLS; its
//!    residuals stand in for the unobserved innovations.
//! 3. Regress `z_t` on an intercept, `z_{t−1..t−p}` and the proxy innovations
//!    `ε̂_{t−1..t−q}`.
//!
//! When the second stage is rank deficient, has too few rows, or yields a
//! non-invertible MA polynomial, the model falls back to a plain AR(p) fit
//! and says so in [`ArimaFit::ar_only_fallback`].

use nalgebra::DMatrix;

use super::{fit_autoregression, ForecastError};
use crate::stats::{self, Design};

/// Shortest history accepted for ARIMA(p, d, q).
pub fn min_history(p: usize, d: usize, q: usize) -> usize {
    (p + q + 2).max(2 * p + 2) + d
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaFit {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub intercept: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub ar_std_errors: Vec<f64>,
    pub ma_std_errors: Vec<f64>,
    /// Innovation variance estimate from the final regression.
    pub sigma2: f64,
    pub ar_only_fallback: bool,
    /// Most recent differenced values, oldest first (length p).
    recent: Vec<f64>,
    /// Most recent innovation estimates, oldest first (length q, zeros after fallback).
    recent_innovations: Vec<f64>,
    /// Last undifferenced value, used to integrate when `d = 1`.
    last_level: f64,
}

pub fn fit_arima(history: &[f64], p: usize, d: usize, q: usize) -> Result<ArimaFit, ForecastError> {
    if d > 1 {
        return Err(ForecastError::InvalidSpec(format!("differencing order {d} not in {{0, 1}}")));
    }
    let need = min_history(p, d, q);
    if history.len() < need {
        return Err(ForecastError::InsufficientHistory { kind: "arima", need, got: history.len() });
    }
    let z: Vec<f64> = if d == 1 { history.windows(2).map(|w| w[1] - w[0]).collect() } else { history.to_vec() };
    let last_level = history[history.len() - 1];

    if q > 0 {
        if let Some(fit) = hannan_rissanen(&z, p, q) {
            return Ok(ArimaFit { d, last_level, ..fit });
        }
    }
    let ar = fit_autoregression(&z, p)?;
    let df = (ar.residuals.len() as f64 - (p + 1) as f64).max(1.0);
    let sigma2 = ar.residuals.iter().map(|e| e * e).sum::<f64>() / df;
    Ok(ArimaFit {
        p,
        d,
        q,
        intercept: ar.intercept,
        recent: z[z.len() - p..].to_vec(),
        recent_innovations: vec![0.0; q],
        ar: ar.coefficients,
        ma: vec![0.0; q],
        ar_std_errors: ar.std_errors,
        ma_std_errors: vec![f64::NAN; q],
        sigma2,
        ar_only_fallback: q > 0,
        last_level,
    })
}

fn hannan_rissanen(z: &[f64], p: usize, q: usize) -> Option<ArimaFit> {
    let n = z.len();
    let long_order = (n / 4).min(2 * (p + q));
    if long_order == 0 {
        return None;
    }
    let long = fit_autoregression(z, long_order).ok()?;
    // long.residuals[k] is the innovation proxy at time long_order + k.
    let innovation = |t: usize| long.residuals[t - long_order];

    let start = p.max(long_order + q);
    if n <= start {
        return None;
    }
    let rows = n - start;
    if rows <= 1 + p + q {
        return None;
    }
    let mut design = Design::with_intercept(rows);
    for lag in 1..=p {
        design.push((start..n).map(|t| z[t - lag]).collect());
    }
    for lag in 1..=q {
        design.push((start..n).map(|t| innovation(t - lag)).collect());
    }
    let fit = stats::ols(&design, &z[start..]).ok()?;
    let ar = fit.coefficients[1..=p].to_vec();
    let ma = fit.coefficients[p + 1..].to_vec();
    if !is_invertible(&ma) {
        return None;
    }
    let sigma2 = fit.rss / fit.residual_df().max(1) as f64;
    // Final-stage residuals are the innovations for the last q time points.
    let recent_innovations = fit.residuals[rows - q..].to_vec();
    Some(ArimaFit {
        p,
        d: 0,
        q,
        intercept: fit.coefficients[0],
        ar_std_errors: fit.std_errors[1..=p].to_vec(),
        ma_std_errors: fit.std_errors[p + 1..].to_vec(),
        ar,
        ma,
        sigma2,
        ar_only_fallback: false,
        recent: z[n - p..].to_vec(),
        recent_innovations,
        last_level: 0.0,
    })
}

/// Roots of `1 + θ₁B + … + θ_qB^q` lie outside the unit circle, i.e. the
/// companion matrix has spectral radius below one.
fn is_invertible(ma: &[f64]) -> bool {
    let q = ma.len();
    if q == 0 {
        return true;
    }
    if ma.iter().any(|c| !c.is_finite()) {
        return false;
    }
    let mut companion = DMatrix::<f64>::zeros(q, q);
    for (j, c) in ma.iter().enumerate() {
        companion[(0, j)] = -c;
    }
    for i in 1..q {
        companion[(i, i - 1)] = 1.0;
    }
    let radius = companion.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    radius < 1.0
}

impl ArimaFit {
    /// Recursive forecast with future innovations set to zero, integrated
    /// back to levels when `d = 1`.
    pub fn forecast(&self, horizon: usize) -> Vec<f64> {
        let mut z = self.recent.clone();
        let mut eps = self.recent_innovations.clone();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let (nz, ne) = (z.len(), eps.len());
            let mut next = self.intercept;
            for (i, c) in self.ar.iter().enumerate() {
                next += c * z[nz - 1 - i];
            }
            for (j, c) in self.ma.iter().enumerate() {
                next += c * eps[ne - 1 - j];
            }
            z.push(next);
            eps.push(0.0);
            out.push(next);
        }
        if self.d == 1 {
            let mut level = self.last_level;
            for v in out.iter_mut() {
                level += *v;
                *v = level;
            }
        }
        out
    }
}
