//! Time-domain residual filters feeding the Portmanteau benchmark.
//!
//! All three filters use the zero pre-sample convention: unobserved values
//! and innovations before the first observation are treated as zero, so a
//! filter is a lower-triangular linear map of the data.

use crate::error::{GofError, Result};
use crate::models::{fracdiff_coeffs, FamilyKind};
use crate::spectral::TimeSeries;

fn check_unit(x: f64, what: &str) -> Result<()> {
    if !(x.is_finite() && x.abs() < 1.0) {
        return Err(GofError::InvalidParameter(format!("{what} {x} outside (-1, 1)")));
    }
    Ok(())
}

/// Innovations implied by an autoregressive fit: e(t) = x(t) - delta x(t-1)
/// with x(0) = 0.
pub fn ar1_residuals(x: &TimeSeries, delta: f64) -> Result<TimeSeries> {
    check_unit(delta, "autoregressive coefficient")?;
    let v = x.values();
    let mut e = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let lagged = if i == 0 { 0.0 } else { v[i - 1] };
        e.push(v[i] - delta * lagged);
    }
    TimeSeries::new(e)
}

/// Innovations implied by a moving-average fit: e(t) = x(t) - eta e(t-1)
/// with e(0) = 0.
pub fn ma1_residuals(x: &TimeSeries, eta: f64) -> Result<TimeSeries> {
    check_unit(eta, "moving-average coefficient")?;
    let v = x.values();
    let mut e = Vec::with_capacity(v.len());
    let mut prev = 0.0;
    for &xv in v {
        let next = xv - eta * prev;
        e.push(next);
        prev = next;
    }
    TimeSeries::new(e)
}

/// Innovations implied by a long-memory fit: the truncated fractional
/// difference e(t) = sum_{j < t} theta(j, d) x(t - j).
pub fn arfima_residuals(x: &TimeSeries, d: f64) -> Result<TimeSeries> {
    let v = x.values();
    let coef = fracdiff_coeffs(d, v.len())?;
    let mut e = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += coef[j] * v[i - j];
        }
        e.push(acc);
    }
    TimeSeries::new(e)
}

/// Whitening filter for a fitted family, applied at its estimated parameter.
///
/// The moving-average recursion above subtracts eta times the lagged
/// residual, which inverts a path whose lagged innovation carries a plus
/// sign. A fitted moving-average family parameter enters the spectrum as
/// 1 - 2 eta cos(lambda) + eta^2, the opposite time-domain sign, so it is
/// negated before filtering. The other two families need no adjustment.
pub fn family_residuals(
    kind: FamilyKind,
    x: &TimeSeries,
    theta: f64,
) -> Result<TimeSeries> {
    match kind {
        FamilyKind::Ar1 => ar1_residuals(x, theta),
        FamilyKind::Ma1 => ma1_residuals(x, -theta),
        FamilyKind::Arfima0d0 => arfima_residuals(x, theta),
    }
}
