//! Data-generating processes for tests and Monte Carlo experiments:
//! Gaussian innovations, short-memory recursions, exact long-memory
//! sampling, and the local-alternative designs used in the power studies.
//!
//! Everything here is a pure function of its specification. Innovations
//! come from a counter-based stream keyed by the seed, so a path is
//! reproducible bit-for-bit across platforms and thread schedules, and a
//! perturbed model at perturbation zero replays the base model's draw
//! exactly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GofError, Result};
use crate::models::{FamilyKind, ParamVector, SpectralFamily};
use crate::special::ln_gamma;
use crate::spectral::TimeSeries;

/// Samples discarded before the retained path for the moving-average
/// recursions (the transient is one lag, but the generous default makes
/// the retained path indistinguishable from stationarity).
pub const MA_BURNIN: usize = 500;
/// Samples discarded for recursions with an autoregressive pole, whose
/// transient decays like |delta|^t.
pub const AR_BURNIN: usize = 1_000;

/// Process family of a simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    Iid,
    Ar1,
    Ma1,
    Arma11,
    Arfima0d0,
    Arfima1d0,
}

impl DgpKind {
    pub fn name(self) -> &'static str {
        match self {
            DgpKind::Iid => "iid",
            DgpKind::Ar1 => "ar1",
            DgpKind::Ma1 => "ma1",
            DgpKind::Arma11 => "arma11",
            DgpKind::Arfima0d0 => "arfima0d0",
            DgpKind::Arfima1d0 => "arfima1d0",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "iid" => DgpKind::Iid,
            "ar1" => DgpKind::Ar1,
            "ma1" => DgpKind::Ma1,
            "arma11" => DgpKind::Arma11,
            "arfima0d0" | "arfima" => DgpKind::Arfima0d0,
            "arfima1d0" => DgpKind::Arfima1d0,
            other => {
                return Err(GofError::Parse(format!(
                    "unknown process kind {other:?}; expected iid, ar1, ma1, arma11, \
                     arfima0d0 or arfima1d0"
                )))
            }
        })
    }

    /// Number of parameters the kind expects, in the order documented on
    /// [`DgpSpec::params`].
    pub fn param_dim(self) -> usize {
        match self {
            DgpKind::Iid => 0,
            DgpKind::Ar1 | DgpKind::Ma1 | DgpKind::Arfima0d0 => 1,
            DgpKind::Arma11 | DgpKind::Arfima1d0 => 2,
        }
    }
}

impl std::fmt::Display for DgpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Full specification of one simulated path.
///
/// Parameter layout: `ar1` takes the autoregressive coefficient, `ma1` the
/// moving-average coefficient, `arma11` both in that order, `arfima0d0`
/// the memory parameter, and `arfima1d0` the autoregressive coefficient
/// followed by the memory parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    #[serde(default = "ParamVector::empty")]
    pub params: ParamVector,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    /// Warm-up override for the filtering recursions; ignored by `iid` and
    /// the exact long-memory sampler, which have no transient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burnin: Option<usize>,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, params: Vec<f64>, t: usize, seed: u64) -> Self {
        DgpSpec { kind, params: ParamVector::new(params), t, seed, burnin: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(GofError::InvalidParameter("sample size must be positive".into()));
        }
        let dim = self.kind.param_dim();
        if self.params.len() != dim {
            return Err(GofError::InvalidParameter(format!(
                "{} takes {dim} parameter(s); got {}",
                self.kind,
                self.params.len()
            )));
        }
        let v = self.params.values();
        let check_unit = |x: f64, what: &str| -> Result<()> {
            if !(x.is_finite() && x.abs() < 1.0) {
                return Err(GofError::InvalidParameter(format!(
                    "{what} {x} outside (-1, 1)"
                )));
            }
            Ok(())
        };
        let check_memory = |d: f64| -> Result<()> {
            if !(d.is_finite() && d.abs() < 0.5) {
                return Err(GofError::InvalidParameter(format!(
                    "memory parameter {d} outside (-0.5, 0.5)"
                )));
            }
            Ok(())
        };
        match self.kind {
            DgpKind::Iid => {}
            DgpKind::Ar1 => check_unit(v[0], "autoregressive coefficient")?,
            DgpKind::Ma1 => check_unit(v[0], "moving-average coefficient")?,
            DgpKind::Arma11 => {
                check_unit(v[0], "autoregressive coefficient")?;
                check_unit(v[1], "moving-average coefficient")?;
            }
            DgpKind::Arfima0d0 => check_memory(v[0])?,
            DgpKind::Arfima1d0 => {
                check_unit(v[0], "autoregressive coefficient")?;
                check_memory(v[1])?;
            }
        }
        Ok(())
    }

    fn effective_burnin(&self) -> usize {
        match self.kind {
            DgpKind::Iid | DgpKind::Arfima0d0 => 0,
            DgpKind::Ma1 => self.burnin.unwrap_or(MA_BURNIN),
            DgpKind::Ar1 | DgpKind::Arma11 | DgpKind::Arfima1d0 => {
                self.burnin.unwrap_or(AR_BURNIN)
            }
        }
    }
}

/// Standard normal innovations from the counter-based stream for `seed`.
pub fn gen_innovations(t: usize, seed: u64) -> Result<TimeSeries> {
    if t == 0 {
        return Err(GofError::InvalidParameter("need at least one innovation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TimeSeries::new((0..t).map(|_| rng.sample(StandardNormal)).collect())
}

/// Exact zero-mean Gaussian path with autocovariances `acov` by
/// conditional sampling: each value is its best linear prediction from the
/// past plus an innovation scaled by the prediction error variance, with
/// the prediction coefficients updated recursively.
fn conditional_gaussian_path(acov: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let n = z.len();
    debug_assert!(acov.len() >= n);
    let mut x = Vec::with_capacity(n);
    let mut v = acov[0];
    if !(v.is_finite() && v > 0.0) {
        return Err(GofError::DegenerateInput(format!(
            "autocovariance at lag zero is {v}"
        )));
    }
    x.push(v.sqrt() * z[0]);
    // phi holds the current prediction coefficients phi[n-1][j].
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    for i in 1..n {
        let k = phi.len();
        let mut num = acov[i];
        for (j, &p) in phi.iter().enumerate() {
            num -= p * acov[i - 1 - j];
        }
        let kappa = num / v;
        prev.clear();
        prev.extend_from_slice(&phi);
        for j in 0..k {
            phi[j] = prev[j] - kappa * prev[k - 1 - j];
        }
        phi.push(kappa);
        v *= 1.0 - kappa * kappa;
        if !(v.is_finite() && v > 0.0) {
            return Err(GofError::DegenerateInput(format!(
                "prediction variance collapsed to {v} at step {i}; \
                 autocovariances are not positive definite"
            )));
        }
        let mut mean = 0.0;
        for (j, &p) in phi.iter().enumerate() {
            mean += p * x[i - 1 - j];
        }
        x.push(mean + v.sqrt() * z[i]);
    }
    Ok(x)
}

/// Autocovariances of the stationary long-memory process at unit
/// innovation variance: lag zero from the gamma-function closed form, the
/// rest by the stable ratio recurrence. Exactly the unit impulse at d = 0.
pub fn arfima_autocovariances(d: f64, n: usize) -> Result<Vec<f64>> {
    if !(d.is_finite() && d.abs() < 0.5) {
        return Err(GofError::InvalidParameter(format!(
            "memory parameter {d} outside (-0.5, 0.5)"
        )));
    }
    let mut acov = Vec::with_capacity(n);
    let g0 = if d == 0.0 {
        1.0
    } else {
        (ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp()
    };
    acov.push(g0);
    for k in 1..n {
        let kf = k as f64;
        let prev = acov[k - 1];
        acov.push(prev * (kf - 1.0 + d) / (kf - d));
    }
    Ok(acov)
}

fn ar1_filter(innov: &[f64], delta: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(innov.len());
    let mut prev = 0.0;
    for &e in innov {
        let next = delta * prev + e;
        x.push(next);
        prev = next;
    }
    x
}

/// Simulates one path. Pure in `spec`; recursions start from zero state
/// and discard the warm-up, the long-memory sampler is exact and needs
/// none.
pub fn simulate(spec: &DgpSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let burnin = spec.effective_burnin();
    let n = spec.t + burnin;
    let v = spec.params.values().to_vec();
    let innov = gen_innovations(n, spec.seed)?;
    let e = innov.values();

    let full: Vec<f64> = match spec.kind {
        DgpKind::Iid => e.to_vec(),
        DgpKind::Ar1 => ar1_filter(e, v[0]),
        DgpKind::Ma1 => {
            let eta = v[0];
            let mut x = Vec::with_capacity(n);
            for i in 0..n {
                let lagged = if i == 0 { 0.0 } else { e[i - 1] };
                x.push(e[i] + eta * lagged);
            }
            x
        }
        DgpKind::Arma11 => {
            let (delta, eta) = (v[0], v[1]);
            let mut x = Vec::with_capacity(n);
            let mut prev = 0.0;
            for i in 0..n {
                let lagged = if i == 0 { 0.0 } else { e[i - 1] };
                let next = delta * prev + e[i] + eta * lagged;
                x.push(next);
                prev = next;
            }
            x
        }
        DgpKind::Arfima0d0 => {
            let acov = arfima_autocovariances(v[0], n)?;
            conditional_gaussian_path(&acov, e)?
        }
        DgpKind::Arfima1d0 => {
            let acov = arfima_autocovariances(v[1], n)?;
            let y = conditional_gaussian_path(&acov, e)?;
            ar1_filter(&y, v[0])
        }
    };
    TimeSeries::new(full[burnin..].to_vec())
}

/// Which one-dimensional departure a local alternative moves along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Fractional,
    Ma,
    Ar,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Fractional => "fractional",
            Direction::Ma => "ma",
            Direction::Ar => "ar",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "fractional" => Direction::Fractional,
            "ma" => Direction::Ma,
            "ar" => Direction::Ar,
            other => {
                return Err(GofError::Parse(format!(
                    "unknown direction {other:?}; expected fractional, ma or ar"
                )))
            }
        })
    }

    /// Score of the departure at the null, as a function on (0, pi]: the
    /// direction the directional test is pointed along.
    pub fn score(self, lambda: f64) -> f64 {
        match self {
            Direction::Fractional => -2.0 * (2.0 * (lambda / 2.0).sin()).abs().ln(),
            Direction::Ma => -2.0 * lambda.cos(),
            Direction::Ar => 2.0 * lambda.cos(),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Draws from the model at distance `tau / sqrt(T)` from the base along
/// `direction`. At `tau = 0` the draw replays the base model's path
/// bit-for-bit: the perturbed recursions collapse to the base ones term by
/// term on the same innovation stream.
pub fn local_alternative(
    base_family: &SpectralFamily,
    theta0: &ParamVector,
    tau: f64,
    direction: Direction,
    t: usize,
    seed: u64,
) -> Result<TimeSeries> {
    if t == 0 {
        return Err(GofError::InvalidParameter("sample size must be positive".into()));
    }
    if !tau.is_finite() {
        return Err(GofError::InvalidParameter(format!("drift size {tau} not finite")));
    }
    let shift = tau / (t as f64).sqrt();
    // `theta0` and the drift live in spectral-family coordinates, where a
    // moving-average parameter eta enters through 1 - 2 eta cos(lambda) +
    // eta^2. The simulator's moving-average slot multiplies the lagged
    // innovation with a plus sign, so family values are negated on the way
    // into a DgpSpec. Autoregressive slots carry no such flip.
    let spec = match (direction, base_family.kind()) {
        (Direction::Fractional, FamilyKind::Ar1) => {
            if shift.abs() >= 0.5 {
                return Err(GofError::InvalidParameter(format!(
                    "memory perturbation {shift} leaves (-0.5, 0.5)"
                )));
            }
            DgpSpec::new(DgpKind::Arfima1d0, vec![theta0.values()[0], shift], t, seed)
        }
        (Direction::Ma, FamilyKind::Ar1) => {
            if shift.abs() >= 1.0 {
                return Err(GofError::InvalidParameter(format!(
                    "moving-average perturbation {shift} leaves (-1, 1)"
                )));
            }
            DgpSpec::new(DgpKind::Arma11, vec![theta0.values()[0], -shift], t, seed)
        }
        (Direction::Ar, FamilyKind::Ma1) => {
            if shift.abs() >= 1.0 {
                return Err(GofError::InvalidParameter(format!(
                    "autoregressive perturbation {shift} leaves (-1, 1)"
                )));
            }
            DgpSpec::new(DgpKind::Arma11, vec![shift, -theta0.values()[0]], t, seed)
        }
        (dir, base) => {
            return Err(GofError::InvalidParameter(format!(
                "no local {dir} design over a {base:?} base"
            )));
        }
    };
    // Match the base kind's warm-up so tau = 0 replays the base draw on
    // the same stream offset. The pole a nonzero tau introduces in the ar
    // design is at most |tau| / sqrt(T), far inside the unit circle, so
    // the moving-average warm-up still covers its transient.
    let mut spec = spec;
    spec.burnin = Some(match direction {
        Direction::Fractional | Direction::Ma => AR_BURNIN,
        Direction::Ar => MA_BURNIN,
    });
    simulate(&spec)
}
