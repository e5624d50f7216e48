//! Empirical processes for the goodness-of-fit tests: the normalized
//! cumulative periodogram (Bartlett) process and its martingale transform
//! built from recursive least-squares residuals.
//!
//! The transform regresses each periodogram ratio on the regressors of
//! strictly later (forward) or strictly earlier (backward) frequencies.
//! Moving the cut by one frequency changes the normal equations by a
//! rank-one term, so the whole residual sequence costs O(T p^2) via
//! Sherman-Morrison updates, each gated by a direct-solve fallback when
//! the update denominator degenerates.
//!
//! Each residual carries the classical recursive-residual standardization:
//! division by the square root of one plus the prediction leverage. Without
//! it the few residuals near the short end of the regression window have
//! prediction variance far above the innovation variance and the cusum is
//! visibly over-dispersed at realistic sample sizes; with it every
//! increment shares the innovation variance and the same Brownian limit
//! holds.

use crate::error::{GofError, Result};
use crate::linalg;
use crate::models::{ParamVector, SpectralModel};
use crate::spectral::PeriodogramGrid;
use crate::whittle::{spectral_ratios, WhittleFit};
use std::f64::consts::PI;

/// Which empirical process a path holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    Alpha,
    BetaForward,
    BetaBackward,
    BetaTapered,
}

/// Residual direction for the transformed process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Forward,
    Backward,
}

/// Step-function values of an empirical process on the Fourier grid.
/// `values` has length `t_tilde` for the alpha process and `t_bar` for the
/// transformed ones; `normalizer` keeps the objective value G(pi) used for
/// scaling.
#[derive(Debug, Clone)]
pub struct ProcessPath {
    kind: ProcessKind,
    values: Vec<f64>,
    t: usize,
    t_tilde: usize,
    t_bar: usize,
    normalizer: f64,
}

impl ProcessPath {
    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn t_tilde(&self) -> usize {
        self.t_tilde
    }

    /// T_tilde minus the regressor dimension p + 1.
    pub fn t_bar(&self) -> usize {
        self.t_bar
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Nominal argument of the i-th value (1-based) in (0, pi].
    pub fn lambda(&self, i: usize) -> f64 {
        let denom = if self.kind == ProcessKind::Alpha {
            self.t_tilde
        } else {
            self.t_bar
        };
        PI * i as f64 / denom as f64
    }

    /// Test scaffolding: a path with prescribed values and bookkeeping.
    #[cfg(test)]
    pub(crate) fn synthetic(
        kind: ProcessKind,
        values: Vec<f64>,
        t: usize,
        t_tilde: usize,
        t_bar: usize,
        normalizer: f64,
    ) -> ProcessPath {
        ProcessPath { kind, values, t, t_tilde, t_bar, normalizer }
    }

    /// CSV rendering with columns index, lambda, value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,lambda,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, self.lambda(i + 1), v));
        }
        out
    }
}

/// Bartlett process: values[m] = sqrt(T_tilde) (S_m / S_total - m / T_tilde)
/// where S_m is the partial sum of periodogram-to-density ratios.
pub fn bartlett_process(
    pg: &PeriodogramGrid,
    model: &dyn SpectralModel,
    theta: &ParamVector,
) -> Result<ProcessPath> {
    let ratios = spectral_ratios(pg, model, theta)?;
    let t_tilde = ratios.len();
    let total: f64 = ratios.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(GofError::DegenerateInput(format!(
            "spectral mass {total}; the cumulative process is undefined"
        )));
    }
    let scale = (t_tilde as f64).sqrt();
    let mut values = Vec::with_capacity(t_tilde);
    let mut running = 0.0;
    for (m, r) in ratios.iter().enumerate() {
        running += r;
        values.push(scale * (running / total - (m + 1) as f64 / t_tilde as f64));
    }
    Ok(ProcessPath {
        kind: ProcessKind::Alpha,
        values,
        t: pg.t(),
        t_tilde,
        t_bar: t_tilde.saturating_sub(model.param_dim() + 1),
        normalizer: 2.0 * PI * total / t_tilde as f64,
    })
}

/// Inverse normal-equation matrix and coefficient vector carried through
/// the rank-one recursion.
#[derive(Debug, Clone)]
pub struct RecursionState {
    a_inv: Vec<f64>,
    b: Vec<f64>,
    dim: usize,
}

impl RecursionState {
    pub fn a_inv(&self) -> &[f64] {
        &self.a_inv
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn symmetrize(&mut self) {
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                let m = 0.5 * (self.a_inv[i * self.dim + j] + self.a_inv[j * self.dim + i]);
                self.a_inv[i * self.dim + j] = m;
                self.a_inv[j * self.dim + i] = m;
            }
        }
    }
}

/// Update denominators below this trigger a direct rebuild of the state.
const SM_GUARD: f64 = 1e-12;
/// Relative pivot tolerance for the direct solves.
const PIVOT_TOL: f64 = 1e-13;
/// Short windows are rebuilt fresh every step and longer ones every this
/// many steps, so rank-one rounding never compounds across more than one
/// refresh interval. Amortized cost stays linear in the window count.
const REFRESH_EVERY: usize = 32;

/// True when the window of `len` regressors should be solved fresh.
fn refresh_window(len: usize, dim: usize) -> bool {
    len <= 4 * dim || len % REFRESH_EVERY == 0
}

fn check_inputs(ratios: &[f64], gammas: &[Vec<f64>]) -> Result<usize> {
    let t_tilde = ratios.len();
    if gammas.len() != t_tilde || t_tilde == 0 {
        return Err(GofError::TransformFailure(format!(
            "{} ratios but {} regressor vectors",
            t_tilde,
            gammas.len()
        )));
    }
    let dim = gammas[0].len();
    if dim == 0 || gammas.iter().any(|g| g.len() != dim) {
        return Err(GofError::TransformFailure(
            "regressor vectors have inconsistent dimensions".into(),
        ));
    }
    if t_tilde <= dim {
        return Err(GofError::TransformFailure(format!(
            "{t_tilde} frequencies cannot support {dim}-dimensional regressions"
        )));
    }
    Ok(dim)
}

/// State over an arbitrary window, solved by modified Gram-Schmidt on the
/// design matrix. Regressors of adjacent frequencies are nearly collinear,
/// and the design factorization carries the square root of the normal
/// equations' condition number, so this is the accuracy anchor for both
/// recursions: their starts, their periodic refreshes, and the fallback
/// when a rank-one update degenerates.
fn design_state(
    ratios: &[f64],
    gammas: &[Vec<f64>],
    idx: std::ops::Range<usize>,
    dim: usize,
) -> Option<RecursionState> {
    let t_tilde = ratios.len() as f64;
    let rows: Vec<usize> = idx.collect();
    if rows.len() < dim {
        return None;
    }
    let mut cols: Vec<Vec<f64>> =
        (0..dim).map(|m| rows.iter().map(|&k| gammas[k][m]).collect()).collect();
    let mut y: Vec<f64> = rows.iter().map(|&k| ratios[k]).collect();

    // Thin QR: cols become the orthonormal basis, r the triangular factor,
    // z the projected response.
    let mut r = vec![0.0; dim * dim];
    let mut z = vec![0.0; dim];
    for m in 0..dim {
        let (head, tail) = cols.split_at_mut(m);
        let cm = &mut tail[0];
        let original = linalg::dot(cm, cm).sqrt();
        for (p, cp) in head.iter().enumerate() {
            let proj = linalg::dot(cp, cm);
            r[p * dim + m] = proj;
            for (v, q) in cm.iter_mut().zip(cp) {
                *v -= proj * q;
            }
        }
        let norm = linalg::dot(cm, cm).sqrt();
        if !(norm > PIVOT_TOL * original.max(1.0)) {
            return None;
        }
        r[m * dim + m] = norm;
        for v in cm.iter_mut() {
            *v /= norm;
        }
        let proj = linalg::dot(cm, &y);
        z[m] = proj;
        for (v, q) in y.iter_mut().zip(cm.iter()) {
            *v -= proj * q;
        }
    }

    // Back-substitute R b = z.
    let mut b = vec![0.0; dim];
    for m in (0..dim).rev() {
        let mut acc = z[m];
        for p in m + 1..dim {
            acc -= r[m * dim + p] * b[p];
        }
        b[m] = acc / r[m * dim + m];
    }

    // A^{-1} = T_tilde R^{-1} R^{-T} for the scaled Gram A = G'G / T_tilde.
    let mut r_inv = vec![0.0; dim * dim];
    for m in (0..dim).rev() {
        r_inv[m * dim + m] = 1.0 / r[m * dim + m];
        for p in (0..m).rev() {
            let mut acc = 0.0;
            for q in p + 1..=m {
                acc += r[p * dim + q] * r_inv[q * dim + m];
            }
            r_inv[p * dim + m] = -acc / r[p * dim + p];
        }
    }
    let mut a_inv = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += r_inv[i * dim + k] * r_inv[j * dim + k];
            }
            a_inv[i * dim + j] = t_tilde * acc;
        }
    }
    Some(RecursionState { a_inv, b, dim })
}

/// Rank-one growth of the state by (1/T_tilde) u u' and the matching
/// coefficient update with response r_u. Returns false when the
/// Sherman-Morrison denominator is too close to zero.
fn rank_one_grow(state: &mut RecursionState, u: &[f64], r_u: f64, t_tilde: f64) -> bool {
    let dim = state.dim;
    let au = linalg::mat_vec(&state.a_inv, dim, u);
    let q = linalg::dot(u, &au);
    if (1.0 + q / t_tilde).abs() < SM_GUARD {
        return false;
    }
    let denom = t_tilde + q;
    for i in 0..dim {
        for j in 0..dim {
            state.a_inv[i * dim + j] -= au[i] * au[j] / denom;
        }
    }
    state.symmetrize();
    let innov = r_u - linalg::dot(u, &state.b);
    let au_new = linalg::mat_vec(&state.a_inv, dim, u);
    for i in 0..dim {
        state.b[i] += au_new[i] * innov / t_tilde;
    }
    true
}

/// Standardization factor of the residual with regressor `g` against the
/// current window: sqrt of one plus the prediction leverage.
fn leverage_factor(state: &RecursionState, g: &[f64], t_tilde: f64) -> f64 {
    let ag = linalg::mat_vec(&state.a_inv, state.dim, g);
    (1.0 + linalg::dot(g, &ag) / t_tilde).sqrt()
}

/// Forward recursive least-squares residuals e(1..T_bar): each ratio is
/// regressed on the regressors of strictly later frequencies and the
/// prediction error is standardized by its leverage factor.
pub fn forward_residuals(ratios: &[f64], gammas: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(forward_residuals_with_state(ratios, gammas)?.0)
}

pub fn forward_residuals_with_state(
    ratios: &[f64],
    gammas: &[Vec<f64>],
) -> Result<(Vec<f64>, RecursionState)> {
    let dim = check_inputs(ratios, gammas)?;
    let t_tilde = ratios.len();
    let t_bar = t_tilde - dim;

    // Anchor at j = t_bar with the trailing dim frequencies.
    let mut state = design_state(ratios, gammas, t_bar..t_tilde, dim).ok_or_else(|| {
        GofError::TransformFailure(format!(
            "regressor matrix over the trailing {dim} frequencies is singular"
        ))
    })?;

    let mut e = vec![0.0; t_bar];
    let g = &gammas[t_bar - 1];
    e[t_bar - 1] = (ratios[t_bar - 1] - linalg::dot(g, &state.b))
        / leverage_factor(&state, g, t_tilde as f64);

    // March the cut down: state(j) gains the term of frequency j + 1.
    for j in (1..t_bar).rev() {
        let len = t_tilde - j;
        if refresh_window(len, dim)
            || !rank_one_grow(&mut state, &gammas[j], ratios[j], t_tilde as f64)
        {
            state = design_state(ratios, gammas, j..t_tilde, dim).ok_or_else(|| {
                GofError::TransformFailure(format!(
                    "regressor matrix rebuilt at frequency {} is singular",
                    j + 1
                ))
            })?;
        }
        let g = &gammas[j - 1];
        e[j - 1] = (ratios[j - 1] - linalg::dot(g, &state.b))
            / leverage_factor(&state, g, t_tilde as f64);
    }
    Ok((e, state))
}

/// Backward recursive residuals for 1-based j = p + 2 .. T_tilde: each
/// ratio is regressed on the regressors of strictly earlier frequencies
/// and standardized by its leverage factor. The first usable index is
/// p + 2, where the leading block reaches full rank.
pub fn backward_residuals(ratios: &[f64], gammas: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(backward_residuals_with_state(ratios, gammas)?.0)
}

pub fn backward_residuals_with_state(
    ratios: &[f64],
    gammas: &[Vec<f64>],
) -> Result<(Vec<f64>, RecursionState)> {
    let dim = check_inputs(ratios, gammas)?;
    let t_tilde = ratios.len();
    let t_bar = t_tilde - dim;

    let mut state = design_state(ratios, gammas, 0..dim, dim).ok_or_else(|| {
        GofError::TransformFailure(format!(
            "regressor matrix over the leading {dim} frequencies is singular"
        ))
    })?;

    let mut e = vec![0.0; t_bar];
    // 1-based start index dim + 1 is slice index dim.
    e[0] = (ratios[dim] - linalg::dot(&gammas[dim], &state.b))
        / leverage_factor(&state, &gammas[dim], t_tilde as f64);

    for j in dim + 1..t_tilde {
        // Moving the cut up past slice index j - 1 adds that term.
        if refresh_window(j, dim)
            || !rank_one_grow(&mut state, &gammas[j - 1], ratios[j - 1], t_tilde as f64)
        {
            state = design_state(ratios, gammas, 0..j, dim).ok_or_else(|| {
                GofError::TransformFailure(format!(
                    "regressor matrix rebuilt at frequency {j} is singular"
                ))
            })?;
        }
        e[j - dim] = (ratios[j] - linalg::dot(&gammas[j], &state.b))
            / leverage_factor(&state, &gammas[j], t_tilde as f64);
    }
    Ok((e, state))
}

fn regressor_grid(
    pg: &PeriodogramGrid,
    model: &dyn SpectralModel,
    theta: &ParamVector,
) -> Result<Vec<Vec<f64>>> {
    (1..=pg.t_tilde())
        .map(|j| model.regressor(theta, pg.freq(j)))
        .collect()
}

fn cusum_path(
    residuals: &[f64],
    scale: f64,
    kind: ProcessKind,
    pg: &PeriodogramGrid,
    dim: usize,
    normalizer: f64,
) -> ProcessPath {
    let mut values = Vec::with_capacity(residuals.len());
    let mut running = 0.0;
    for e in residuals {
        running += e;
        values.push(scale * running);
    }
    ProcessPath {
        kind,
        values,
        t: pg.t(),
        t_tilde: pg.t_tilde(),
        t_bar: pg.t_tilde() - dim,
        normalizer,
    }
}

/// Martingale-transformed process: scaled cusum of recursive residuals of
/// the fitted ratios.
pub fn transformed_process(
    pg: &PeriodogramGrid,
    model: &dyn SpectralModel,
    fit: &WhittleFit,
    variant: Variant,
) -> Result<ProcessPath> {
    let ratios = spectral_ratios(pg, model, &fit.theta_hat)?;
    let t_tilde = ratios.len();
    let g_pi = 2.0 * PI * ratios.iter().sum::<f64>() / t_tilde as f64;
    if !(g_pi.is_finite() && g_pi > 0.0) {
        return Err(GofError::DegenerateInput(format!(
            "objective value {g_pi}; cannot normalize the transformed process"
        )));
    }
    let gammas = regressor_grid(pg, model, &fit.theta_hat)?;
    let dim = model.param_dim() + 1;
    let (e, kind) = match variant {
        Variant::Forward => (forward_residuals(&ratios, &gammas)?, ProcessKind::BetaForward),
        Variant::Backward => (backward_residuals(&ratios, &gammas)?, ProcessKind::BetaBackward),
    };
    let scale = (2.0 * PI / g_pi) / (t_tilde as f64).sqrt();
    Ok(cusum_path(&e, scale, kind, pg, dim, g_pi))
}

/// Tapered variant: same recursion on tapered ordinates, rescaled by the
/// taper constant sqrt(35/18).
pub fn transformed_process_tapered(
    pg: &PeriodogramGrid,
    model: &dyn SpectralModel,
    fit: &WhittleFit,
) -> Result<ProcessPath> {
    if !pg.is_tapered() {
        return Err(GofError::InvalidConfig(
            "tapered transform requires a tapered periodogram".into(),
        ));
    }
    let ratios = spectral_ratios(pg, model, &fit.theta_hat)?;
    let t_tilde = ratios.len();
    let g_pi = 2.0 * PI * ratios.iter().sum::<f64>() / t_tilde as f64;
    if !(g_pi.is_finite() && g_pi > 0.0) {
        return Err(GofError::DegenerateInput(format!(
            "objective value {g_pi}; cannot normalize the transformed process"
        )));
    }
    let gammas = regressor_grid(pg, model, &fit.theta_hat)?;
    let dim = model.param_dim() + 1;
    let e = forward_residuals(&ratios, &gammas)?;
    let scale = (pg.taper_norm() / t_tilde as f64).sqrt() * (2.0 * PI / g_pi);
    Ok(cusum_path(&e, scale, ProcessKind::BetaTapered, pg, dim, g_pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{SpectralFamily, WhiteNoiseModel};
    use crate::spectral::{periodogram, tapered_periodogram, TimeSeries};
    use crate::whittle;
    use rand::{Rng, SeedableRng};

    fn noise(t: usize, seed: u64) -> TimeSeries {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        TimeSeries::new(
            (0..t)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect(),
        )
        .unwrap()
    }

    fn impulse(t: usize) -> TimeSeries {
        let mut v = vec![0.0; t];
        v[0] = 1.0;
        TimeSeries::new(v).unwrap()
    }

    /// Residuals recomputed with an independent direct solve per index,
    /// including the leverage standardization.
    fn direct_residuals(
        ratios: &[f64],
        gammas: &[Vec<f64>],
        forward: bool,
    ) -> Vec<f64> {
        let t_tilde = ratios.len();
        let dim = gammas[0].len();
        let t_bar = t_tilde - dim;
        let mut out = Vec::new();
        let one_residual = |range: std::ops::Range<usize>, target: usize| -> f64 {
            let mut a = vec![0.0; dim * dim];
            let mut s = vec![0.0; dim];
            for k in range {
                for i in 0..dim {
                    for j in 0..dim {
                        a[i * dim + j] += gammas[k][i] * gammas[k][j];
                    }
                    s[i] += gammas[k][i] * ratios[k];
                }
            }
            let g = &gammas[target];
            let b = crate::linalg::solve(&a, dim, &s, 1e-13).unwrap();
            let z = crate::linalg::solve(&a, dim, g, 1e-13).unwrap();
            let h = crate::linalg::dot(g, &z);
            (ratios[target] - crate::linalg::dot(g, &b)) / (1.0 + h).sqrt()
        };
        if forward {
            for j in 1..=t_bar {
                out.push(one_residual(j..t_tilde, j - 1));
            }
        } else {
            for j in dim + 1..=t_tilde {
                out.push(one_residual(0..j - 1, j - 1));
            }
        }
        out
    }

    #[test]
    fn alpha_is_zero_for_flat_spectrum() {
        // A unit impulse has an exactly flat periodogram.
        let pg = periodogram(&impulse(64)).unwrap();
        let path = bartlett_process(&pg, &WhiteNoiseModel, &ParamVector::empty()).unwrap();
        assert_eq!(path.kind(), ProcessKind::Alpha);
        assert_eq!(path.values().len(), 32);
        for &v in path.values() {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn alpha_matches_cusum_oracle_and_ends_at_zero() {
        let pg = periodogram(&noise(16, 5)).unwrap();
        let path = bartlett_process(&pg, &WhiteNoiseModel, &ParamVector::empty()).unwrap();
        let r: Vec<f64> = pg.ordinates().to_vec();
        let total: f64 = r.iter().sum();
        for m in 1..=8 {
            let partial: f64 = r[..m].iter().sum();
            let want = (8.0_f64).sqrt() * (partial / total - m as f64 / 8.0);
            assert!((path.values()[m - 1] - want).abs() < 1e-12);
        }
        assert!(path.values()[7].abs() < 1e-9);

        // Also tied down with an estimated parameter.
        let pg = periodogram(&noise(200, 8)).unwrap();
        let fam = SpectralFamily::ar1();
        let fit = whittle::fit(&pg, &fam).unwrap();
        let path = bartlett_process(&pg, &fam, &fit.theta_hat).unwrap();
        assert!(path.values().last().unwrap().abs() < 1e-9);
        assert_eq!(path.t_bar(), path.t_tilde() - 2);
    }

    #[test]
    fn zero_series_is_degenerate() {
        let x = TimeSeries::new(vec![0.0; 64]).unwrap();
        let pg = periodogram(&x).unwrap();
        let r = bartlett_process(&pg, &WhiteNoiseModel, &ParamVector::empty());
        assert!(matches!(r, Err(GofError::DegenerateInput(_))));
    }

    #[test]
    fn forward_intercept_only_is_standardized_mean_correction() {
        // With an intercept regressor the leverage against an n-point
        // window is 1/n, so the residual is the demeaned value divided by
        // sqrt(1 + 1/n).
        let pg = periodogram(&noise(32, 9)).unwrap();
        let r: Vec<f64> = pg.ordinates().to_vec();
        let gammas: Vec<Vec<f64>> = vec![vec![1.0]; r.len()];
        let e = forward_residuals(&r, &gammas).unwrap();
        assert_eq!(e.len(), r.len() - 1);
        for j in 1..r.len() {
            let tail = &r[j..];
            let n = tail.len() as f64;
            let mean = tail.iter().sum::<f64>() / n;
            let want = (r[j - 1] - mean) / (1.0 + 1.0 / n).sqrt();
            assert!((e[j - 1] - want).abs() < 1e-12, "j={j}");
        }
    }

    #[test]
    fn backward_intercept_only_is_standardized_mean_correction() {
        let pg = periodogram(&noise(32, 10)).unwrap();
        let r: Vec<f64> = pg.ordinates().to_vec();
        let gammas: Vec<Vec<f64>> = vec![vec![1.0]; r.len()];
        let e = backward_residuals(&r, &gammas).unwrap();
        assert_eq!(e.len(), r.len() - 1);
        for j in 2..=r.len() {
            let head = &r[..j - 1];
            let n = head.len() as f64;
            let mean = head.iter().sum::<f64>() / n;
            let want = (r[j - 1] - mean) / (1.0 + 1.0 / n).sqrt();
            assert!((e[j - 2] - want).abs() < 1e-12, "j={j}");
        }
    }

    #[test]
    fn constant_ratios_give_zero_residuals() {
        let fam = SpectralFamily::ar1();
        let theta = ParamVector::scalar(0.3);
        let t_tilde = 24;
        let gammas: Vec<Vec<f64>> = (1..=t_tilde)
            .map(|j| fam.regressor(&theta, PI * j as f64 / t_tilde as f64).unwrap())
            .collect();
        let r = vec![1.7; t_tilde];
        for e in forward_residuals(&r, &gammas).unwrap() {
            assert!(e.abs() < 1e-10);
        }
        for e in backward_residuals(&r, &gammas).unwrap() {
            assert!(e.abs() < 1e-10);
        }
    }

    #[test]
    fn recursions_match_direct_solves() {
        for fam in [SpectralFamily::ar1(), SpectralFamily::ma1(), SpectralFamily::arfima()] {
            for &t in &[32usize, 64] {
                for seed in 0..5 {
                    let pg = periodogram(&noise(t, 100 + seed)).unwrap();
                    let fit = whittle::fit(&pg, &fam).unwrap();
                    let ratios = spectral_ratios(&pg, &fam, &fit.theta_hat).unwrap();
                    let gammas = regressor_grid(&pg, &fam, &fit.theta_hat).unwrap();

                    let (e, state) = forward_residuals_with_state(&ratios, &gammas).unwrap();
                    let oracle = direct_residuals(&ratios, &gammas, true);
                    for (a, b) in e.iter().zip(&oracle) {
                        assert!((a - b).abs() < 1e-9, "{} T={t} seed={seed}", fam.name());
                    }
                    // Final inverse stays symmetric.
                    for i in 0..state.dim() {
                        for j in 0..state.dim() {
                            let d = state.a_inv()[i * state.dim() + j]
                                - state.a_inv()[j * state.dim() + i];
                            assert!(d.abs() < 1e-9);
                        }
                    }

                    let eb = backward_residuals(&ratios, &gammas).unwrap();
                    let oracle_b = direct_residuals(&ratios, &gammas, false);
                    for (a, b) in eb.iter().zip(&oracle_b) {
                        assert!((a - b).abs() < 1e-9, "bwd {} T={t} seed={seed}", fam.name());
                    }
                }
            }
        }
    }

    #[test]
    fn residuals_kill_the_regressor_direction() {
        let fam = SpectralFamily::ma1();
        let pg = periodogram(&noise(64, 17)).unwrap();
        let fit = whittle::fit(&pg, &fam).unwrap();
        let ratios = spectral_ratios(&pg, &fam, &fit.theta_hat).unwrap();
        let gammas = regressor_grid(&pg, &fam, &fit.theta_hat).unwrap();
        let c = [0.7, -1.3];
        let shifted: Vec<f64> = ratios
            .iter()
            .zip(&gammas)
            .map(|(r, g)| r + g[0] * c[0] + g[1] * c[1])
            .collect();

        let e1 = forward_residuals(&ratios, &gammas).unwrap();
        let e2 = forward_residuals(&shifted, &gammas).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).abs() < 1e-9);
        }
        let b1 = backward_residuals(&ratios, &gammas).unwrap();
        let b2 = backward_residuals(&shifted, &gammas).unwrap();
        for (a, b) in b1.iter().zip(&b2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_input_validation() {
        let gammas: Vec<Vec<f64>> = vec![vec![1.0, 0.5]; 4];
        assert!(forward_residuals(&[1.0; 3], &gammas).is_err());
        assert!(forward_residuals(&[1.0; 4], &vec![vec![1.0, 0.5]; 2]).is_err());
        // Identical regressors: the anchor block is singular.
        let flat: Vec<Vec<f64>> = vec![vec![1.0, 1.0]; 8];
        let r: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert!(matches!(
            forward_residuals(&r, &flat),
            Err(GofError::TransformFailure(_))
        ));
        assert!(matches!(
            backward_residuals(&r, &flat),
            Err(GofError::TransformFailure(_))
        ));
    }

    #[test]
    fn beta_is_the_scaled_residual_cusum() {
        let fam = SpectralFamily::ar1();
        let pg = periodogram(&noise(128, 23)).unwrap();
        let fit = whittle::fit(&pg, &fam).unwrap();
        let beta = transformed_process(&pg, &fam, &fit, Variant::Forward).unwrap();
        assert_eq!(beta.kind(), ProcessKind::BetaForward);
        assert_eq!(beta.values().len(), 64 - 2);
        assert_eq!(beta.t_bar(), 62);

        let ratios = spectral_ratios(&pg, &fam, &fit.theta_hat).unwrap();
        let gammas = regressor_grid(&pg, &fam, &fit.theta_hat).unwrap();
        let e = forward_residuals(&ratios, &gammas).unwrap();
        let g_pi = beta.normalizer();
        let scale = (2.0 * PI / g_pi) / (64.0_f64).sqrt();
        let mut run = 0.0;
        for (m, ei) in e.iter().enumerate() {
            run += ei;
            assert!((beta.values()[m] - scale * run).abs() < 1e-12);
        }

        let bwd = transformed_process(&pg, &fam, &fit, Variant::Backward).unwrap();
        assert_eq!(bwd.kind(), ProcessKind::BetaBackward);
        assert_eq!(bwd.values().len(), 62);
    }

    #[test]
    fn beta_vanishes_on_flat_ratios() {
        let pg = periodogram(&impulse(64)).unwrap();
        let fit = whittle::fit(&pg, &WhiteNoiseModel).unwrap();
        let beta = transformed_process(&pg, &WhiteNoiseModel, &fit, Variant::Forward).unwrap();
        for &v in beta.values() {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn tapered_transform_scales_by_the_taper_constant() {
        let fam = SpectralFamily::ar1();
        let x = noise(128, 31);
        let pgw = tapered_periodogram(&x).unwrap();
        let fit = whittle::fit(&pgw, &fam).unwrap();
        let tap = transformed_process_tapered(&pgw, &fam, &fit).unwrap();
        assert_eq!(tap.kind(), ProcessKind::BetaTapered);

        // Same recursion, untapered scaling, times sqrt(35/18).
        let plain = transformed_process(&pgw, &fam, &fit, Variant::Forward).unwrap();
        let c = (35.0_f64 / 18.0).sqrt();
        for (a, b) in tap.values().iter().zip(plain.values()) {
            assert!((a - c * b).abs() < 1e-12);
        }

        // Raw periodogram is refused.
        let pg = periodogram(&x).unwrap();
        let fit2 = whittle::fit(&pg, &fam).unwrap();
        assert!(transformed_process_tapered(&pg, &fam, &fit2).is_err());
    }

    #[test]
    fn csv_export_shape() {
        let pg = periodogram(&noise(32, 40)).unwrap();
        let path = bartlett_process(&pg, &WhiteNoiseModel, &ParamVector::empty()).unwrap();
        let csv = path.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,lambda,value");
        assert_eq!(lines.len(), 1 + 16);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "1");
        let lambda: f64 = fields[1].parse().unwrap();
        assert!((lambda - PI / 16.0).abs() < 1e-12);
        fields[2].parse::<f64>().unwrap();
        // Last row sits at pi.
        let last: Vec<&str> = lines[16].split(',').collect();
        assert!((last[1].parse::<f64>().unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn affine_invariance_of_beta() {
        // The trailing anchor block is nearly collinear and its normal
        // equations square the conditioning, so the path's reproducibility
        // under input rounding degrades like T^4. At T = 64 the pipeline
        // is stable far below the 1e-9 contract; larger T only loosens the
        // bitwise agreement, not the statistics.
        let fam = SpectralFamily::ar1();
        let x = noise(64, 77);
        let pg = periodogram(&x).unwrap();
        let fit = whittle::fit(&pg, &fam).unwrap();
        let base = transformed_process(&pg, &fam, &fit, Variant::Forward).unwrap();

        for &(a, b) in &[(3.0, 0.0), (1.0, -5.0), (0.1, 7.0)] {
            let y =
                TimeSeries::new(x.values().iter().map(|v| a * v + b).collect()).unwrap();
            let pg2 = periodogram(&y).unwrap();
            let fit2 = whittle::fit(&pg2, &fam).unwrap();
            let path = transformed_process(&pg2, &fam, &fit2, Variant::Forward).unwrap();
            for (u, v) in base.values().iter().zip(path.values()) {
                assert!((u - v).abs() < 1e-9, "a={a} b={b}: {u} vs {v}");
            }
        }
    }
}
