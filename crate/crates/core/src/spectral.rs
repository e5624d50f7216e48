//! Fourier grid and periodogram, raw and tapered.
//!
//! Ordinates live on the positive Fourier frequencies lambda_j = 2 pi j / T
//! for j = 1..floor(T/2); the zero frequency is excluded throughout, the
//! Nyquist ordinate (even T) is included.

use crate::error::{GofError, Result};
use rustfft::{num_complex::Complex, FftPlanner};

/// Minimum sample size for any spectral computation.
pub const MIN_T: usize = 8;

/// Sizes up to this use the exact direct DFT sum; larger sizes go through
/// the FFT. Both paths agree to 1e-9 and the cutover keeps the direct sum's
/// rounding behavior on every size the test suites exercise.
const DIRECT_DFT_MAX: usize = 4096;

/// A finite real sample path.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GofError::DegenerateInput(
                "series contains non-finite values".into(),
            ));
        }
        if values.is_empty() {
            return Err(GofError::DegenerateInput("empty series".into()));
        }
        Ok(TimeSeries { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Periodogram ordinates I(lambda_1..lambda_T_tilde).
#[derive(Debug, Clone)]
pub struct PeriodogramGrid {
    t: usize,
    ordinates: Vec<f64>,
    tapered: bool,
}

impl PeriodogramGrid {
    pub fn t(&self) -> usize {
        self.t
    }

    /// Number of grid ordinates, floor(T/2).
    pub fn t_tilde(&self) -> usize {
        self.ordinates.len()
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    /// Ordinate at 1-based index j.
    pub fn ordinate(&self, j: usize) -> f64 {
        self.ordinates[j - 1]
    }

    /// lambda_j = 2 pi j / T for 1-based j.
    pub fn freq(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.t as f64
    }

    pub fn is_tapered(&self) -> bool {
        self.tapered
    }

    /// Variance rescaling constant for the taper: 35/18 for the full
    /// cosine window, 1 for the raw periodogram.
    pub fn taper_norm(&self) -> f64 {
        if self.tapered {
            35.0 / 18.0
        } else {
            1.0
        }
    }
}

/// Raw periodogram I(lambda_j) = |sum_t x(t) e^{i t lambda_j}|^2 / (2 pi T).
pub fn periodogram(x: &TimeSeries) -> Result<PeriodogramGrid> {
    let t = x.len();
    if t < MIN_T {
        return Err(GofError::SeriesTooShort { len: t, min: MIN_T });
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * t as f64);
    let ordinates = dft_sq_modulus(x.values()).into_iter().map(|m| m * norm).collect();
    Ok(PeriodogramGrid {
        t,
        ordinates,
        tapered: false,
    })
}

/// Tapered periodogram with the full cosine window
/// w(t) = (1 - cos(2 pi t / T)) / 2, normalized by 2 pi sum w^2.
pub fn tapered_periodogram(x: &TimeSeries) -> Result<PeriodogramGrid> {
    let t = x.len();
    if t < MIN_T {
        return Err(GofError::SeriesTooShort { len: t, min: MIN_T });
    }
    let mut windowed = Vec::with_capacity(t);
    let mut w2 = 0.0;
    for (i, &v) in x.values().iter().enumerate() {
        let arg = 2.0 * std::f64::consts::PI * (i + 1) as f64 / t as f64;
        let w = 0.5 * (1.0 - arg.cos());
        w2 += w * w;
        windowed.push(w * v);
    }
    if w2 == 0.0 {
        return Err(GofError::DegenerateInput("taper window summed to zero".into()));
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * w2);
    let ordinates = dft_sq_modulus(&windowed).into_iter().map(|m| m * norm).collect();
    Ok(PeriodogramGrid {
        t,
        ordinates,
        tapered: true,
    })
}

/// |sum_{t=1}^{T} x(t) e^{i t lambda_j}|^2 for j = 1..floor(T/2).
fn dft_sq_modulus(x: &[f64]) -> Vec<f64> {
    if x.len() <= DIRECT_DFT_MAX {
        dft_sq_modulus_direct(x)
    } else {
        dft_sq_modulus_fft(x)
    }
}

fn dft_sq_modulus_direct(x: &[f64]) -> Vec<f64> {
    let t = x.len();
    let t_tilde = t / 2;
    let mut out = Vec::with_capacity(t_tilde);
    for j in 1..=t_tilde {
        let lambda = 2.0 * std::f64::consts::PI * j as f64 / t as f64;
        let (mut re, mut im) = (0.0_f64, 0.0_f64);
        // Rotation recurrence for e^{i t lambda}; at these sizes the
        // accumulated rounding stays far below 1e-9.
        let (step_c, step_s) = (lambda.cos(), lambda.sin());
        let (mut c, mut s) = (step_c, step_s);
        for &v in x {
            re += v * c;
            im += v * s;
            let cn = c * step_c - s * step_s;
            s = c * step_s + s * step_c;
            c = cn;
        }
        out.push(re * re + im * im);
    }
    out
}

fn dft_sq_modulus_fft(x: &[f64]) -> Vec<f64> {
    let t = x.len();
    let t_tilde = t / 2;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(t);
    // With y_s = x(s+1), |sum_t x(t) e^{i t lambda_j}| equals the modulus
    // of the standard forward-transform bin j of y.
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    (1..=t_tilde).map(|j| buf[j].norm_sqr()).collect()
}
