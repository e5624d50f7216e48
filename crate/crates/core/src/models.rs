//! Parametric spectral families: AR(1), MA(1) and ARFIMA(0,d,0).
//!
//! Each family provides the normalized spectral density `h`, its
//! parameter score `d log h / d theta`, and the regressor vector
//! `(1, score)` used by the recursive least-squares transform. Densities
//! are normalized so the log-spectrum integrates to zero over (0, pi),
//! which makes the innovation variance a separate nuisance parameter.

use crate::error::{GofError, Result};
use serde::{Deserialize, Serialize};

/// Closed interval for one parameter coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ParamInterval {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Parameter vector theta; length must match the family's dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn scalar(value: f64) -> Self {
        ParamVector(vec![value])
    }

    pub fn empty() -> Self {
        ParamVector(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A parametric spectral shape. Implementations beyond the built-in
/// one-parameter families (Bloomfield exponential, richer ARFIMA orders)
/// only need a density and a score.
pub trait SpectralModel {
    fn param_dim(&self) -> usize;

    fn param_box(&self) -> Vec<ParamInterval>;

    /// Normalized spectral density h_theta at lambda in (0, pi].
    fn density(&self, theta: &ParamVector, lambda: f64) -> Result<f64>;

    /// Gradient of log h_theta in theta, length `param_dim`.
    fn score(&self, theta: &ParamVector, lambda: f64) -> Result<Vec<f64>>;

    /// Regressor vector (1, score') of length param_dim + 1.
    fn regressor(&self, theta: &ParamVector, lambda: f64) -> Result<Vec<f64>> {
        let mut g = Vec::with_capacity(self.param_dim() + 1);
        g.push(1.0);
        g.extend(self.score(theta, lambda)?);
        Ok(g)
    }

    fn check_params(&self, theta: &ParamVector) -> Result<()> {
        let boxes = self.param_box();
        if theta.len() != boxes.len() {
            return Err(GofError::InvalidParameter(format!(
                "expected {} parameter(s), got {}",
                boxes.len(),
                theta.len()
            )));
        }
        for (i, (v, b)) in theta.values().iter().zip(&boxes).enumerate() {
            if !v.is_finite() || !b.contains(*v) {
                return Err(GofError::InvalidParameter(format!(
                    "coordinate {i} = {v} outside [{}, {}]",
                    b.lo, b.hi
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Ar1,
    Ma1,
    /// ARFIMA(0, d, 0); named "arfima" on the command line.
    #[serde(rename = "arfima")]
    Arfima0d0,
}

/// The built-in one-parameter families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralFamily {
    kind: FamilyKind,
}

impl SpectralFamily {
    pub fn new(kind: FamilyKind) -> Self {
        SpectralFamily { kind }
    }

    pub fn ar1() -> Self {
        Self::new(FamilyKind::Ar1)
    }

    pub fn ma1() -> Self {
        Self::new(FamilyKind::Ma1)
    }

    pub fn arfima() -> Self {
        Self::new(FamilyKind::Arfima0d0)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "ar1" => Ok(Self::ar1()),
            "ma1" => Ok(Self::ma1()),
            "arfima" | "arfima0d0" => Ok(Self::arfima()),
            other => Err(GofError::Parse(format!(
                "unknown family '{other}' (expected ar1, ma1 or arfima)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::Ar1 => "ar1",
            FamilyKind::Ma1 => "ma1",
            FamilyKind::Arfima0d0 => "arfima",
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }
}

/// Boxes stay strictly inside the stationarity/invertibility region so the
/// optimizer never evaluates at the boundary.
const AR_MA_BOUND: f64 = 0.99;
const D_BOUND: f64 = 0.49;

fn check_lambda(lambda: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda <= 0.0 || lambda > std::f64::consts::PI + 1e-12 {
        return Err(GofError::Domain(format!(
            "frequency {lambda} outside (0, pi]; the spectral pole at 0 is never evaluated"
        )));
    }
    Ok(lambda.min(std::f64::consts::PI))
}

impl SpectralModel for SpectralFamily {
    fn param_dim(&self) -> usize {
        1
    }

    fn param_box(&self) -> Vec<ParamInterval> {
        let b = match self.kind {
            FamilyKind::Ar1 | FamilyKind::Ma1 => AR_MA_BOUND,
            FamilyKind::Arfima0d0 => D_BOUND,
        };
        vec![ParamInterval { lo: -b, hi: b }]
    }

    fn density(&self, theta: &ParamVector, lambda: f64) -> Result<f64> {
        self.check_params(theta)?;
        let lambda = check_lambda(lambda)?;
        let t = theta.values()[0];
        let c = lambda.cos();
        Ok(match self.kind {
            FamilyKind::Ar1 => 1.0 / (1.0 - 2.0 * t * c + t * t),
            FamilyKind::Ma1 => 1.0 - 2.0 * t * c + t * t,
            // |2 sin(lambda/2)|^{-2d}; sin is positive on (0, pi].
            FamilyKind::Arfima0d0 => (-2.0 * t * (2.0 * (0.5 * lambda).sin()).ln()).exp(),
        })
    }

    fn score(&self, theta: &ParamVector, lambda: f64) -> Result<Vec<f64>> {
        self.check_params(theta)?;
        let lambda = check_lambda(lambda)?;
        let t = theta.values()[0];
        let c = lambda.cos();
        Ok(vec![match self.kind {
            FamilyKind::Ar1 => -2.0 * (t - c) / (1.0 - 2.0 * t * c + t * t),
            FamilyKind::Ma1 => 2.0 * (t - c) / (1.0 - 2.0 * t * c + t * t),
            FamilyKind::Arfima0d0 => -2.0 * (2.0 * (0.5 * lambda).sin()).ln(),
        }])
    }
}

/// The null family with no free parameters and h identically 1. Serves as
/// the p = 0 degenerate case for the estimator and the transform.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhiteNoiseModel;

impl SpectralModel for WhiteNoiseModel {
    fn param_dim(&self) -> usize {
        0
    }

    fn param_box(&self) -> Vec<ParamInterval> {
        Vec::new()
    }

    fn density(&self, theta: &ParamVector, lambda: f64) -> Result<f64> {
        self.check_params(theta)?;
        check_lambda(lambda)?;
        Ok(1.0)
    }

    fn score(&self, theta: &ParamVector, lambda: f64) -> Result<Vec<f64>> {
        self.check_params(theta)?;
        check_lambda(lambda)?;
        Ok(Vec::new())
    }
}

/// Coefficients of (1 - L)^d up to lag n - 1.
///
/// Multiplicative recurrence: coef(0) = 1, coef(j) = coef(j-1) (j-1-d)/j,
/// which equals Gamma(j-d) / (Gamma(-d) Gamma(j+1)) without the overflow.
pub fn fracdiff_coeffs(d: f64, n: usize) -> Result<Vec<f64>> {
    if !(d.is_finite() && d.abs() < 0.5) {
        return Err(GofError::InvalidParameter(format!(
            "fractional order {d} outside (-0.5, 0.5)"
        )));
    }
    if n == 0 {
        return Err(GofError::InvalidParameter("need at least one coefficient".into()));
    }
    let mut coef = Vec::with_capacity(n);
    coef.push(1.0);
    for j in 1..n {
        let prev = coef[j - 1];
        coef.push(prev * (j as f64 - 1.0 - d) / j as f64);
    }
    Ok(coef)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_abs_gamma_signed;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn interior_thetas(family: &SpectralFamily) -> Vec<f64> {
        match family.kind() {
            FamilyKind::Arfima0d0 => vec![-0.4, -0.15, 0.0, 0.2, 0.45],
            _ => vec![-0.8, -0.3, 0.0, 0.4, 0.9],
        }
    }

    #[test]
    fn density_reference_points() {
        let ar = SpectralFamily::ar1();
        for &l in &[0.3, 1.0, PI] {
            assert!((ar.density(&ParamVector::scalar(0.0), l).unwrap() - 1.0).abs() < 1e-15);
        }

        // MA(1) near zero frequency approaches (1 - eta)^2.
        let ma = SpectralFamily::ma1();
        let h = ma.density(&ParamVector::scalar(0.5), 1e-9).unwrap();
        assert!((h - 0.25).abs() < 1e-8);

        let fi = SpectralFamily::arfima();
        let h = fi.density(&ParamVector::scalar(0.4), PI).unwrap();
        assert!((h - 2.0_f64.powf(-0.8)).abs() < 1e-14);
    }

    #[test]
    fn score_reference_points() {
        let ar = SpectralFamily::ar1();
        for &l in &[0.2, 1.3, 2.9] {
            let s = ar.score(&ParamVector::scalar(0.0), l).unwrap();
            assert!((s[0] - 2.0 * l.cos()).abs() < 1e-14);
        }

        let ma = SpectralFamily::ma1();
        let s = ma.score(&ParamVector::scalar(0.0), 1e-9).unwrap();
        assert!((s[0] + 2.0).abs() < 1e-8);

        let fi = SpectralFamily::arfima();
        let s = fi.score(&ParamVector::scalar(0.3), PI).unwrap();
        assert!((s[0] + 2.0 * 2.0_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn regressor_prepends_intercept() {
        let ar = SpectralFamily::ar1();
        let g = ar.regressor(&ParamVector::scalar(0.0), PI / 2.0).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0], 1.0);
        assert!(g[1].abs() < 1e-15);

        let ma = SpectralFamily::ma1();
        let g = ma.regressor(&ParamVector::scalar(0.0), 1e-9).unwrap();
        assert!((g[1] + 2.0).abs() < 1e-8);

        let fi = SpectralFamily::arfima();
        let g = fi.regressor(&ParamVector::scalar(0.2), PI).unwrap();
        assert!((g[1] + 2.0 * 2.0_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn zero_frequency_is_an_error() {
        for fam in [SpectralFamily::ar1(), SpectralFamily::ma1(), SpectralFamily::arfima()] {
            let theta = ParamVector::scalar(0.2);
            assert!(fam.density(&theta, 0.0).is_err());
            assert!(fam.score(&theta, -0.1).is_err());
            assert!(fam.density(&theta, PI + 0.001).is_err());
        }
    }

    #[test]
    fn out_of_box_parameters_rejected() {
        let ar = SpectralFamily::ar1();
        assert!(ar.density(&ParamVector::scalar(0.995), 1.0).is_err());
        assert!(ar.density(&ParamVector::new(vec![0.1, 0.2]), 1.0).is_err());
        let fi = SpectralFamily::arfima();
        assert!(fi.density(&ParamVector::scalar(0.5), 1.0).is_err());
        assert!(fi.density(&ParamVector::scalar(f64::NAN), 1.0).is_err());
    }

    #[test]
    fn score_matches_finite_differences() {
        // Central difference of log h in theta, relative error < 1e-6.
        let step = 1e-5;
        for fam in [SpectralFamily::ar1(), SpectralFamily::ma1(), SpectralFamily::arfima()] {
            for &t in &interior_thetas(&fam) {
                for k in 0..100 {
                    let l = 0.01 + (PI - 0.01) * (k as f64 + 0.5) / 100.0;
                    let s = fam.score(&ParamVector::scalar(t), l).unwrap()[0];
                    let hp = fam.density(&ParamVector::scalar(t + step), l).unwrap().ln();
                    let hm = fam.density(&ParamVector::scalar(t - step), l).unwrap().ln();
                    let fd = (hp - hm) / (2.0 * step);
                    let denom = s.abs().max(1.0);
                    assert!(
                        ((s - fd) / denom).abs() < 1e-6,
                        "{} theta={t} lambda={l}: score {s} vs fd {fd}",
                        fam.name()
                    );
                }
            }
        }
    }

    #[test]
    fn log_spectrum_integrates_to_zero() {
        // Trapezoid on (eps, pi] plus the analytic contribution of the
        // log singularity at 0 for the fractional family, where
        // log h ~ -2d log(lambda) and the integral over (0, eps) is
        // -2d (eps log eps - eps).
        let n = 100_000;
        let eps = 1e-6;
        for fam in [SpectralFamily::ar1(), SpectralFamily::ma1(), SpectralFamily::arfima()] {
            for &t in &interior_thetas(&fam) {
                let theta = ParamVector::scalar(t);
                let h = (PI - eps) / n as f64;
                let mut sum = 0.0;
                for i in 0..=n {
                    let l = eps + i as f64 * h;
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    sum += w * fam.density(&theta, l).unwrap().ln();
                }
                let mut integral = sum * h;
                if fam.kind() == FamilyKind::Arfima0d0 {
                    integral += -2.0 * t * (eps * eps.ln() - eps);
                }
                assert!(
                    integral.abs() < 1e-3,
                    "{} theta={t}: integral {integral}",
                    fam.name()
                );
            }
        }
    }

    #[test]
    fn fracdiff_reference_values() {
        let c = fracdiff_coeffs(0.0, 5).unwrap();
        assert_eq!(c, vec![1.0, 0.0, 0.0, 0.0, 0.0]);

        // Gamma-ratio oracle for the first coefficients, using the signed
        // log-gamma since Gamma(-d) changes sign with d.
        for &d in &[-0.45, -0.3, 0.1, 0.3, 0.45] {
            let c = fracdiff_coeffs(d, 4).unwrap();
            for (j, &cj) in c.iter().enumerate() {
                let (num, s1) = ln_abs_gamma_signed(j as f64 - d);
                let (den, s2) = ln_abs_gamma_signed(-d);
                let mut fact = 0.0;
                for i in 2..=j {
                    fact += (i as f64).ln();
                }
                let oracle = s1 * s2 * (num - den - fact).exp();
                assert!(
                    (cj - oracle).abs() < 1e-12,
                    "d={d} j={j}: {cj} vs {oracle}"
                );
            }
        }

        let c = fracdiff_coeffs(0.4, 3).unwrap();
        assert!((c[1] + 0.4).abs() < 1e-15);
        assert!((c[2] + 0.12).abs() < 1e-15);
    }

    #[test]
    fn fracdiff_rejects_bad_orders() {
        assert!(fracdiff_coeffs(0.5, 10).is_err());
        assert!(fracdiff_coeffs(-0.6, 10).is_err());
        assert!(fracdiff_coeffs(f64::NAN, 10).is_err());
        assert!(fracdiff_coeffs(0.2, 0).is_err());
    }

    proptest! {
        // Convolving the d and -d filters recovers the unit impulse.
        #[test]
        fn fracdiff_inverts(d in -0.49f64..0.49) {
            let n = 50;
            let a = fracdiff_coeffs(d, n).unwrap();
            let b = fracdiff_coeffs(-d, n).unwrap();
            for k in 0..n {
                let conv: f64 = (0..=k).map(|j| a[j] * b[k - j]).sum();
                let want = if k == 0 { 1.0 } else { 0.0 };
                prop_assert!((conv - want).abs() < 1e-10, "lag {} -> {}", k, conv);
            }
        }

        #[test]
        fn density_positive_everywhere(t in -0.9f64..0.9, l in 1e-4f64..std::f64::consts::PI) {
            for fam in [SpectralFamily::ar1(), SpectralFamily::ma1()] {
                let h = fam.density(&ParamVector::scalar(t), l).unwrap();
                prop_assert!(h.is_finite() && h > 0.0);
            }
            let d = t * 0.5;
            let h = SpectralFamily::arfima().density(&ParamVector::scalar(d), l).unwrap();
            prop_assert!(h.is_finite() && h > 0.0);
        }
    }

    #[test]
    fn family_names_round_trip() {
        for name in ["ar1", "ma1", "arfima"] {
            assert_eq!(SpectralFamily::from_name(name).unwrap().name(), name);
        }
        assert!(SpectralFamily::from_name("garch").is_err());
    }

    #[test]
    fn white_noise_model_is_flat() {
        let wn = WhiteNoiseModel;
        assert_eq!(wn.param_dim(), 0);
        let theta = ParamVector::empty();
        assert_eq!(wn.density(&theta, 1.0).unwrap(), 1.0);
        assert!(wn.score(&theta, 1.0).unwrap().is_empty());
        assert_eq!(wn.regressor(&theta, 1.0).unwrap(), vec![1.0]);
        assert!(wn.density(&ParamVector::scalar(0.1), 1.0).is_err());
    }
}
