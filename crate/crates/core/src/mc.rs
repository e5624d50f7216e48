//! Monte Carlo harness: sweeps generating parameters and sample sizes,
//! runs the full estimation-and-test pipeline per replication, and tabulates
//! rejection frequencies.
//!
//! Replication r of cell c draws its seed from (master_seed, c, r) alone,
//! so schedules and worker counts never touch the results: aggregation is
//! pure counting and the rendered report is byte-identical across runs.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critvals::{BrownianFunctional, CriticalValues};
use crate::error::{GofError, Result};
use crate::gof::{bartlett_process, transformed_process, Variant};
use crate::models::{FamilyKind, ParamVector, SpectralFamily, SpectralModel};
use crate::residuals::family_residuals;
use crate::sim::{local_alternative, simulate, DgpKind, DgpSpec, Direction};
use crate::special::{chi2_quantile, normal_quantile};
use crate::spectral::periodogram;
use crate::stats::{
    box_pierce, cvm_simple, cvm_stat, directional_stat, drift_l, ell_coefficients,
    ks_stat, smooth_stat, TauSign, MAX_COMPONENTS,
};
use crate::whittle::{self, MIN_FIT_T};

/// Default replication count; tolerances elsewhere assume it.
pub const DEFAULT_REPLICATIONS: usize = 5_000;

/// Cells losing more than this fraction of replications are flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.01;

/// Grid for the drift curve behind directional statistics.
const DRIFT_GRID: usize = 1_024;

const CSV_HEADER: &str = "param,T,statistic,rejections,reps,rate,se,failures";

/// One statistic to evaluate each replication. Serialized with a `kind`
/// tag so config files read as a list of small objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticSpec {
    Ks,
    Cvm,
    /// Simple-hypothesis benchmark evaluated at the generating parameter;
    /// only meaningful inside the Monte Carlo where that value is known.
    C0,
    Smooth {
        n: usize,
    },
    Directional {
        n: usize,
        direction: Direction,
        #[serde(default = "default_tail")]
        tail: TauSign,
    },
    Portmanteau {
        n: usize,
    },
}

fn default_tail() -> TauSign {
    TauSign::Unknown
}

impl StatisticSpec {
    /// Row label, matching the statistic names in single-test reports.
    pub fn token(&self) -> String {
        match self {
            StatisticSpec::Ks => "ks".into(),
            StatisticSpec::Cvm => "cvm".into(),
            StatisticSpec::C0 => "c0".into(),
            StatisticSpec::Smooth { n } => format!("w:{n}"),
            StatisticSpec::Directional { n, .. } => format!("psi:{n}"),
            StatisticSpec::Portmanteau { n } => format!("q:{n}"),
        }
    }

    /// Parses the compact command-line form: `ks`, `cvm`, `c0`, `w:3`,
    /// `psi:3`, `q:6`. A bare `psi:n` points along the fractional
    /// direction with unknown drift sign.
    pub fn from_token(token: &str) -> Result<Self> {
        let bad = || {
            GofError::Parse(format!(
                "unknown statistic {token:?}; expected ks, cvm, c0, w:n, psi:n or q:n"
            ))
        };
        if let Some((head, tail)) = token.split_once(':') {
            let n: usize = tail.parse().map_err(|_| bad())?;
            return match head {
                "w" => Ok(StatisticSpec::Smooth { n }),
                "psi" => Ok(StatisticSpec::Directional {
                    n,
                    direction: Direction::Fractional,
                    tail: TauSign::Unknown,
                }),
                "q" => Ok(StatisticSpec::Portmanteau { n }),
                _ => Err(bad()),
            };
        }
        match token {
            "ks" => Ok(StatisticSpec::Ks),
            "cvm" => Ok(StatisticSpec::Cvm),
            "c0" => Ok(StatisticSpec::C0),
            _ => Err(bad()),
        }
    }
}

/// Drift block of a local-alternative design: the generating model sits at
/// distance tau / sqrt(T) from the swept base point along `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSpec {
    pub direction: Direction,
    pub tau: f64,
}

/// Generating-process template. `params` lists the swept parameter points,
/// one cell per entry per sample size. With `local` set, `kind` names the
/// base null model and `params` its swept parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgpTemplate {
    pub kind: DgpKind,
    #[serde(default)]
    pub params: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burnin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local: Option<LocalSpec>,
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_level() -> f64 {
    0.05
}

/// Experiment description; the JSON config file mirrors these fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dgp: DgpTemplate,
    pub fit_family: FamilyKind,
    pub statistics: Vec<StatisticSpec>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub sample_sizes: Vec<usize>,
    pub master_seed: u64,
    #[serde(default = "default_level")]
    pub nominal_level: f64,
}

impl McConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: McConfig = serde_json::from_str(text)
            .map_err(|e| GofError::Parse(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializing experiment config")
    }

    /// Swept parameter points, with the implicit single empty point for a
    /// parameterless kind.
    fn param_points(&self) -> Vec<Vec<f64>> {
        if self.dgp.params.is_empty() && self.dgp.kind.param_dim() == 0 {
            vec![vec![]]
        } else {
            self.dgp.params.clone()
        }
    }

    /// Component of the generating parameter living in the fitted family,
    /// used by statistics that need the true null value. None when the
    /// design has no such component.
    fn null_theta(&self, point: &[f64]) -> Option<f64> {
        if self.dgp.local.is_some() {
            return match self.dgp.kind {
                DgpKind::Ma1 => point.first().map(|m| -m),
                _ => point.first().copied(),
            };
        }
        // Simulator moving-average labels are the negatives of the spectral
        // family's eta, so those two arms flip sign.
        match (self.dgp.kind, self.fit_family) {
            (DgpKind::Iid, _) => Some(0.0),
            (DgpKind::Ar1, FamilyKind::Ar1)
            | (DgpKind::Arfima0d0, FamilyKind::Arfima0d0) => Some(point[0]),
            (DgpKind::Ma1, FamilyKind::Ma1) => Some(-point[0]),
            (DgpKind::Arma11, FamilyKind::Ar1) => Some(point[0]),
            (DgpKind::Arma11, FamilyKind::Ma1) => Some(-point[1]),
            (DgpKind::Arfima1d0, FamilyKind::Ar1) => Some(point[0]),
            (DgpKind::Arfima1d0, FamilyKind::Arfima0d0) => Some(point[1]),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(GofError::InvalidConfig(
                "replication count must be positive".into(),
            ));
        }
        if !(self.nominal_level > 0.0 && self.nominal_level < 0.5) {
            return Err(GofError::InvalidConfig(format!(
                "nominal level {} outside (0, 0.5)",
                self.nominal_level
            )));
        }
        if self.sample_sizes.is_empty() {
            return Err(GofError::InvalidConfig("no sample sizes".into()));
        }
        for &t in &self.sample_sizes {
            if t < MIN_FIT_T {
                return Err(GofError::InvalidConfig(format!(
                    "sample size {t} below the estimation minimum {MIN_FIT_T}"
                )));
            }
        }
        if self.statistics.is_empty() {
            return Err(GofError::InvalidConfig("no statistics requested".into()));
        }
        if self.statistics.len() > 64 {
            return Err(GofError::InvalidConfig(
                "more than 64 statistics in one experiment".into(),
            ));
        }
        let points = self.param_points();
        if points.is_empty() {
            return Err(GofError::InvalidConfig("no parameter points".into()));
        }
        for p in &points {
            DgpSpec::new(self.dgp.kind, p.clone(), MIN_FIT_T, 0).validate()?;
        }
        if let Some(local) = self.dgp.local {
            if self.dgp.burnin.is_some() {
                return Err(GofError::InvalidConfig(
                    "local designs manage their own warm-up; drop the burnin override"
                        .into(),
                ));
            }
            match (local.direction, self.dgp.kind) {
                (Direction::Fractional | Direction::Ma, DgpKind::Ar1)
                | (Direction::Ar, DgpKind::Ma1) => {}
                (dir, kind) => {
                    return Err(GofError::InvalidConfig(format!(
                        "no local {dir} design over a {kind} base"
                    )));
                }
            }
            let bound = match local.direction {
                Direction::Fractional => 0.5,
                Direction::Ma | Direction::Ar => 1.0,
            };
            for &t in &self.sample_sizes {
                let shift = local.tau / (t as f64).sqrt();
                if !shift.is_finite() || shift.abs() >= bound {
                    return Err(GofError::InvalidConfig(format!(
                        "drift {} at T = {t} shifts the parameter by {shift}, \
                         outside the model region",
                        local.tau
                    )));
                }
            }
        }
        let family = SpectralFamily::new(self.fit_family);
        for stat in &self.statistics {
            match stat {
                StatisticSpec::Smooth { n } | StatisticSpec::Directional { n, .. } => {
                    if *n == 0 || *n > MAX_COMPONENTS {
                        return Err(GofError::InvalidConfig(format!(
                            "component count {n} outside 1..={MAX_COMPONENTS}"
                        )));
                    }
                }
                StatisticSpec::Portmanteau { n } => {
                    let t_min = *self.sample_sizes.iter().min().expect("nonempty");
                    if *n == 0 || 2 * n >= t_min {
                        return Err(GofError::InvalidConfig(format!(
                            "lag count {n} must be positive and below half the \
                             smallest sample size {t_min}"
                        )));
                    }
                }
                StatisticSpec::Ks | StatisticSpec::Cvm | StatisticSpec::C0 => {}
            }
            if matches!(stat, StatisticSpec::C0 | StatisticSpec::Directional { .. }) {
                for p in &points {
                    let theta = self.null_theta(p).ok_or_else(|| {
                        GofError::InvalidConfig(format!(
                            "{} needs the generating value of the fitted parameter, \
                             which a {} design over a {} fit does not pin down",
                            stat.token(),
                            self.dgp.kind,
                            family.name()
                        ))
                    })?;
                    family.check_params(&ParamVector::scalar(theta))?;
                }
            }
        }
        Ok(())
    }
}

/// One aggregated cell-statistic result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McRow {
    pub params: Vec<f64>,
    #[serde(rename = "T")]
    pub t: usize,
    pub statistic: String,
    pub rejections: u64,
    /// Successful replications; the rate's denominator.
    pub replications: u64,
    pub rejection_rate: f64,
    pub std_error: f64,
    pub failures: u64,
    pub flagged: bool,
    /// Wall-clock seconds for the whole cell; not rendered, so reports
    /// stay byte-identical across runs.
    #[serde(default, skip_serializing)]
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    pub rows: Vec<McRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

/// Which side of the threshold rejects.
#[derive(Clone, Copy)]
enum Side {
    Upper,
    AbsUpper,
    Lower,
}

struct StatPlan {
    spec: StatisticSpec,
    threshold: f64,
    side: Side,
    /// Projection coefficients for directional statistics, fixed per cell
    /// at the generating parameter.
    ell: Option<Vec<f64>>,
}

fn threshold_for(
    stat: &StatisticSpec,
    level: f64,
    cv: &CriticalValues,
) -> Result<(f64, Side)> {
    let upper = 1.0 - level;
    Ok(match stat {
        StatisticSpec::Ks => (
            cv.table(BrownianFunctional::SupAbsBrownian).quantile(upper)?,
            Side::Upper,
        ),
        StatisticSpec::Cvm => (
            cv.table(BrownianFunctional::IntSqBrownian).quantile(upper)?,
            Side::Upper,
        ),
        StatisticSpec::C0 => (
            cv.table(BrownianFunctional::IntSqBridge).quantile(upper)?,
            Side::Upper,
        ),
        StatisticSpec::Smooth { n } => (chi2_quantile(upper, *n), Side::Upper),
        StatisticSpec::Directional { tail, .. } => match tail {
            TauSign::Unknown => (normal_quantile(1.0 - level / 2.0), Side::AbsUpper),
            TauSign::Positive => (normal_quantile(upper), Side::Upper),
            TauSign::Negative => (-normal_quantile(upper), Side::Lower),
        },
        StatisticSpec::Portmanteau { .. } => (normal_quantile(upper), Side::Upper),
    })
}

fn rejects(value: f64, plan: &StatPlan) -> bool {
    match plan.side {
        Side::Upper => value > plan.threshold,
        Side::AbsUpper => value.abs() > plan.threshold,
        Side::Lower => value < plan.threshold,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `rep` of cell `cell`: a fixed function of the
/// triple, independent of scheduling.
pub fn replication_seed(master_seed: u64, cell: u64, rep: u64) -> u64 {
    let a = splitmix64(master_seed ^ splitmix64(cell.wrapping_add(1)));
    splitmix64(a ^ splitmix64(rep.wrapping_add(1) ^ 0xA5A5_A5A5_A5A5_A5A5))
}

/// Runs one replication end to end, returning the rejection bitmask over
/// the planned statistics.
fn run_replication(
    cfg: &McConfig,
    point: &[f64],
    t: usize,
    seed: u64,
    plans: &[StatPlan],
    theta0: Option<f64>,
    cv: &CriticalValues,
) -> Result<u64> {
    let family = SpectralFamily::new(cfg.fit_family);
    let x = match cfg.dgp.local {
        Some(local) => {
            // The base parameter goes over in family coordinates; for a
            // moving-average base that is minus the simulator label.
            let (base, theta0) = match cfg.dgp.kind {
                DgpKind::Ar1 => (SpectralFamily::ar1(), point[0]),
                DgpKind::Ma1 => (SpectralFamily::ma1(), -point[0]),
                _ => unreachable!("validated base kind"),
            };
            local_alternative(
                &base,
                &ParamVector::scalar(theta0),
                local.tau,
                local.direction,
                t,
                seed,
            )?
        }
        None => {
            let mut spec = DgpSpec::new(cfg.dgp.kind, point.to_vec(), t, seed);
            spec.burnin = cfg.dgp.burnin;
            simulate(&spec)?
        }
    };
    let pg = periodogram(&x)?;

    let needs_fit = plans
        .iter()
        .any(|p| !matches!(p.spec, StatisticSpec::C0));
    let fit = if needs_fit {
        let fit = whittle::fit(&pg, &family)?;
        if !fit.converged {
            return Err(GofError::EstimationFailure(
                "objective search did not converge".into(),
            ));
        }
        Some(fit)
    } else {
        None
    };
    let needs_beta = plans.iter().any(|p| {
        matches!(
            p.spec,
            StatisticSpec::Ks
                | StatisticSpec::Cvm
                | StatisticSpec::Smooth { .. }
                | StatisticSpec::Directional { .. }
        )
    });
    let beta = if needs_beta {
        Some(transformed_process(
            &pg,
            &family,
            fit.as_ref().expect("beta implies a fit"),
            Variant::Forward,
        )?)
    } else {
        None
    };

    let mut mask = 0u64;
    for (i, plan) in plans.iter().enumerate() {
        let value = match &plan.spec {
            StatisticSpec::Ks => ks_stat(beta.as_ref().expect("planned"), cv)?.value,
            StatisticSpec::Cvm => cvm_stat(beta.as_ref().expect("planned"), cv)?.value,
            StatisticSpec::C0 => {
                let theta = ParamVector::scalar(theta0.expect("validated"));
                let alpha = bartlett_process(&pg, &family, &theta)?;
                cvm_simple(&alpha, cv)?.value
            }
            StatisticSpec::Smooth { n } => {
                smooth_stat(beta.as_ref().expect("planned"), *n)?.value
            }
            StatisticSpec::Directional { tail, .. } => {
                directional_stat(
                    beta.as_ref().expect("planned"),
                    plan.ell.as_ref().expect("planned"),
                    *tail,
                )?
                .value
            }
            StatisticSpec::Portmanteau { n } => {
                let fit = fit.as_ref().expect("planned");
                let resid =
                    family_residuals(cfg.fit_family, &x, fit.theta_hat.values()[0])?;
                box_pierce(&resid, *n)?.value
            }
        };
        if rejects(value, plan) {
            mask |= 1 << i;
        }
    }
    Ok(mask)
}

/// Runs the whole experiment. Replications within a cell execute on the
/// current thread pool; any error inside a replication discards that
/// replication for every statistic of the cell and adds to `failures`.
pub fn run_experiment(cfg: &McConfig, cv: &CriticalValues) -> Result<McReport> {
    cfg.validate()?;
    let family = SpectralFamily::new(cfg.fit_family);
    let points = cfg.param_points();
    let mut rows = Vec::new();
    let mut cell_index = 0u64;
    for point in &points {
        for &t in &cfg.sample_sizes {
            let theta0 = cfg.null_theta(point);
            let mut plans = Vec::with_capacity(cfg.statistics.len());
            for stat in &cfg.statistics {
                let (threshold, side) = threshold_for(stat, cfg.nominal_level, cv)?;
                let ell = match stat {
                    StatisticSpec::Directional { n, direction, .. } => {
                        let theta = ParamVector::scalar(theta0.expect("validated"));
                        let curve = drift_l(
                            &family,
                            &theta,
                            |lambda| direction.score(lambda),
                            DRIFT_GRID,
                        )?;
                        Some(ell_coefficients(&curve, *n)?)
                    }
                    _ => None,
                };
                plans.push(StatPlan { spec: stat.clone(), threshold, side, ell });
            }

            let started = Instant::now();
            let (rejections, failures) = (0..cfg.replications as u64)
                .into_par_iter()
                .map(|rep| {
                    let seed = replication_seed(cfg.master_seed, cell_index, rep);
                    run_replication(cfg, point, t, seed, &plans, theta0, cv)
                })
                .fold(
                    || (vec![0u64; plans.len()], 0u64),
                    |mut acc, outcome| {
                        match outcome {
                            Ok(mask) => {
                                for (i, slot) in acc.0.iter_mut().enumerate() {
                                    *slot += (mask >> i) & 1;
                                }
                            }
                            Err(_) => acc.1 += 1,
                        }
                        acc
                    },
                )
                .reduce(
                    || (vec![0u64; plans.len()], 0u64),
                    |mut a, b| {
                        for (x, y) in a.0.iter_mut().zip(&b.0) {
                            *x += y;
                        }
                        (a.0, a.1 + b.1)
                    },
                );
            let elapsed = started.elapsed().as_secs_f64();

            let successes = cfg.replications as u64 - failures;
            let flagged =
                failures as f64 > FAILURE_FLAG_FRACTION * cfg.replications as f64;
            for (plan, &rej) in plans.iter().zip(&rejections) {
                let (rate, se) = rate_and_se(rej, successes);
                rows.push(McRow {
                    params: point.clone(),
                    t,
                    statistic: plan.spec.token(),
                    rejections: rej,
                    replications: successes,
                    rejection_rate: rate,
                    std_error: se,
                    failures,
                    flagged,
                    elapsed_secs: elapsed,
                });
            }
            cell_index += 1;
        }
    }
    Ok(McReport { rows })
}

fn rate_and_se(rejections: u64, successes: u64) -> (f64, f64) {
    if successes == 0 {
        return (0.0, 0.0);
    }
    let n = successes as f64;
    let rate = rejections as f64 / n;
    (rate, (rate * (1.0 - rate) / n).sqrt())
}

fn format_params(params: &[f64]) -> String {
    params
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn format_percent(rate: f64) -> String {
    format!("{:.2}", 100.0 * rate)
}

/// Renders the report. CSV is the machine format; markdown lays cells out
/// as one row per parameter point and sample size with a column per
/// statistic, flagged cells marked on the failure count.
pub fn render_report(report: &McReport, format: ReportFormat) -> Result<String> {
    if report.rows.is_empty() {
        return Err(GofError::InvalidConfig("empty report".into()));
    }
    match format {
        ReportFormat::Csv => Ok(render_csv(report)),
        ReportFormat::Markdown => Ok(render_markdown(report)),
    }
}

fn render_csv(report: &McReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.3},{}\n",
            format_params(&row.params),
            row.t,
            row.statistic,
            row.rejections,
            row.replications,
            format_percent(row.rejection_rate),
            100.0 * row.std_error,
            row.failures,
        ));
    }
    out
}

fn render_markdown(report: &McReport) -> String {
    let mut stat_order: Vec<String> = Vec::new();
    for row in &report.rows {
        if !stat_order.contains(&row.statistic) {
            stat_order.push(row.statistic.clone());
        }
    }
    let mut cells: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut table: HashMap<(String, usize, String), &McRow> = HashMap::new();
    for row in &report.rows {
        let key = (format_params(&row.params), row.t);
        if !cells.iter().any(|(p, t)| format_params(p) == key.0 && *t == key.1) {
            cells.push((row.params.clone(), row.t));
        }
        table.insert((key.0, key.1, row.statistic.clone()), row);
    }

    let mut out = String::from("| param | T |");
    for s in &stat_order {
        out.push_str(&format!(" {s} |"));
    }
    out.push_str(" failures |\n|---|---|");
    for _ in &stat_order {
        out.push_str("---|");
    }
    out.push_str("---|\n");
    let mut any_flagged = false;
    for (params, t) in &cells {
        let key_p = format_params(params);
        out.push_str(&format!("| {} | {} |", key_p, t));
        let mut failures = 0;
        let mut flagged = false;
        for s in &stat_order {
            match table.get(&(key_p.clone(), *t, s.clone())) {
                Some(row) => {
                    out.push_str(&format!(" {} |", format_percent(row.rejection_rate)));
                    failures = row.failures;
                    flagged = row.flagged;
                }
                None => out.push_str(" - |"),
            }
        }
        any_flagged |= flagged;
        out.push_str(&format!(" {}{} |\n", failures, if flagged { "*" } else { "" }));
    }
    if any_flagged {
        out.push_str("\n\\* more than 1% of replications failed in this cell\n");
    }
    out
}

/// Parses rendered CSV back into a report. Rates and standard errors are
/// reconstructed exactly from the integer columns; elapsed time is not
/// serialized and comes back as zero.
pub fn parse_report_csv(text: &str) -> Result<McReport> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| GofError::Parse("empty report text".into()))?;
    if header != CSV_HEADER {
        return Err(GofError::Parse(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(GofError::Parse(format!(
                "line {}: expected 8 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| {
            GofError::Parse(format!("line {}: bad {what} field", lineno + 2))
        };
        let params: Vec<f64> = if fields[0].is_empty() {
            vec![]
        } else {
            fields[0]
                .split(';')
                .map(|p| p.parse().map_err(|_| bad("param")))
                .collect::<Result<_>>()?
        };
        let t: usize = fields[1].parse().map_err(|_| bad("T"))?;
        let rejections: u64 = fields[3].parse().map_err(|_| bad("rejections"))?;
        let replications: u64 = fields[4].parse().map_err(|_| bad("reps"))?;
        let failures: u64 = fields[7].parse().map_err(|_| bad("failures"))?;
        let (rate, se) = rate_and_se(rejections, replications);
        let total = replications + failures;
        rows.push(McRow {
            params,
            t,
            statistic: fields[2].to_string(),
            rejections,
            replications,
            rejection_rate: rate,
            std_error: se,
            failures,
            flagged: failures as f64 > FAILURE_FLAG_FRACTION * total as f64,
            elapsed_secs: 0.0,
        });
    }
    if rows.is_empty() {
        return Err(GofError::Parse("report has a header but no rows".into()));
    }
    Ok(McReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn base_config() -> McConfig {
        McConfig {
            dgp: DgpTemplate {
                kind: DgpKind::Iid,
                params: vec![],
                burnin: None,
                local: None,
            },
            fit_family: FamilyKind::Ar1,
            statistics: vec![StatisticSpec::Ks],
            replications: 20,
            sample_sizes: vec![64],
            master_seed: 9,
            nominal_level: 0.05,
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut c = base_config();
        c.replications = 0;
        assert!(c.validate().is_err());

        let mut c = base_config();
        c.nominal_level = 0.5;
        assert!(c.validate().is_err());

        let mut c = base_config();
        c.sample_sizes = vec![16];
        assert!(c.validate().is_err());

        let mut c = base_config();
        c.statistics = vec![StatisticSpec::Portmanteau { n: 40 }];
        assert!(c.validate().is_err(), "lag menu beyond T/2");

        let mut c = base_config();
        c.dgp.kind = DgpKind::Ar1;
        c.dgp.params = vec![vec![1.3]];
        assert!(c.validate().is_err(), "explosive parameter point");

        // A moving-average truth under an autoregressive fit leaves the
        // simple-hypothesis benchmark with no defined null value.
        let mut c = base_config();
        c.dgp.kind = DgpKind::Ma1;
        c.dgp.params = vec![vec![0.5]];
        c.statistics = vec![StatisticSpec::C0];
        assert!(c.validate().is_err());

        let mut c = base_config();
        c.dgp.local = Some(LocalSpec { direction: Direction::Fractional, tau: 1.0 });
        assert!(c.validate().is_err(), "local design over an iid base");

        let mut c = base_config();
        c.dgp.kind = DgpKind::Ar1;
        c.dgp.params = vec![vec![0.0]];
        c.dgp.local = Some(LocalSpec { direction: Direction::Fractional, tau: 5.0 });
        c.sample_sizes = vec![64];
        assert!(c.validate().is_err(), "shift 5/8 leaves the memory region");

        assert!(base_config().validate().is_ok());
    }

    #[test]
    fn statistic_tokens_round_trip() {
        let specs = [
            StatisticSpec::Ks,
            StatisticSpec::Cvm,
            StatisticSpec::C0,
            StatisticSpec::Smooth { n: 3 },
            StatisticSpec::Directional {
                n: 6,
                direction: Direction::Fractional,
                tail: TauSign::Unknown,
            },
            StatisticSpec::Portmanteau { n: 10 },
        ];
        let tokens: Vec<String> = specs.iter().map(|s| s.token()).collect();
        assert_eq!(tokens, ["ks", "cvm", "c0", "w:3", "psi:6", "q:10"]);
        for (spec, token) in specs.iter().zip(&tokens) {
            assert_eq!(&StatisticSpec::from_token(token).unwrap(), spec);
        }
        assert!(StatisticSpec::from_token("w:x").is_err());
        assert!(StatisticSpec::from_token("sup").is_err());
    }

    #[test]
    fn config_json_round_trips() {
        let text = r#"{
            "dgp": {"kind": "ar1", "params": [[0.0], [-0.8]],
                    "local": {"direction": "fractional", "tau": 2.0}},
            "fit_family": "ar1",
            "statistics": [{"kind": "cvm"},
                           {"kind": "directional", "n": 3,
                            "direction": "fractional", "tail": "positive"}],
            "sample_sizes": [200],
            "master_seed": 42
        }"#;
        let cfg = McConfig::from_json(text).unwrap();
        assert_eq!(cfg.replications, DEFAULT_REPLICATIONS);
        assert_eq!(cfg.nominal_level, 0.05);
        assert_eq!(cfg.dgp.params.len(), 2);
        assert_eq!(
            cfg.statistics[1],
            StatisticSpec::Directional {
                n: 3,
                direction: Direction::Fractional,
                tail: TauSign::Positive,
            }
        );
        let again = McConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again.master_seed, 42);

        assert!(McConfig::from_json("{\"bogus\": 1}").is_err());
    }

    #[test]
    fn replication_seeds_do_not_collide() {
        let mut seen = HashSet::new();
        for cell in 0..6u64 {
            for rep in 0..3_000u64 {
                assert!(
                    seen.insert(replication_seed(77, cell, rep)),
                    "seed collision at cell {cell}, rep {rep}"
                );
            }
        }
        assert_ne!(
            replication_seed(1, 0, 0),
            replication_seed(2, 0, 0),
            "master seed must enter the derivation"
        );
    }

    #[test]
    fn percent_and_param_formatting() {
        assert_eq!(format_percent(0.0462), "4.62");
        assert_eq!(format_percent(0.0), "0.00");
        assert_eq!(format_percent(1.0), "100.00");
        assert_eq!(format_params(&[]), "");
        assert_eq!(format_params(&[-0.8]), "-0.8");
        assert_eq!(format_params(&[0.5, 0.25]), "0.5;0.25");
    }

    #[test]
    fn csv_round_trip_on_a_small_run() {
        let mut cfg = base_config();
        cfg.statistics = vec![StatisticSpec::Ks, StatisticSpec::Portmanteau { n: 3 }];
        cfg.replications = 40;
        let cv = CriticalValues::bundled();
        let report = run_experiment(&cfg, cv).unwrap();
        assert_eq!(report.rows.len(), 2);

        let csv = render_report(&report, ReportFormat::Csv).unwrap();
        let parsed = parse_report_csv(&csv).unwrap();
        assert_eq!(parsed.rows.len(), report.rows.len());
        for (a, b) in report.rows.iter().zip(&parsed.rows) {
            assert_eq!(a.params, b.params);
            assert_eq!(a.t, b.t);
            assert_eq!(a.statistic, b.statistic);
            assert_eq!(a.rejections, b.rejections);
            assert_eq!(a.replications, b.replications);
            assert_eq!(a.failures, b.failures);
            assert_eq!(a.flagged, b.flagged);
            assert_eq!(a.rejection_rate, b.rejection_rate);
            assert_eq!(a.std_error, b.std_error);
        }

        let one = McReport { rows: vec![report.rows[0].clone()] };
        let two_lines = render_report(&one, ReportFormat::Csv).unwrap();
        assert_eq!(two_lines.trim_end().lines().count(), 2);

        let md = render_report(&report, ReportFormat::Markdown).unwrap();
        assert!(md.contains("| param | T | ks | q:3 | failures |"));

        assert!(render_report(&McReport { rows: vec![] }, ReportFormat::Csv).is_err());
    }

    #[test]
    fn rows_satisfy_the_binomial_identity() {
        let mut cfg = base_config();
        cfg.statistics = vec![
            StatisticSpec::Ks,
            StatisticSpec::Cvm,
            StatisticSpec::Smooth { n: 2 },
            StatisticSpec::Portmanteau { n: 3 },
        ];
        cfg.replications = 120;
        cfg.sample_sizes = vec![96];
        let report = run_experiment(&cfg, CriticalValues::bundled()).unwrap();
        for row in &report.rows {
            assert!((0.0..=1.0).contains(&row.rejection_rate));
            let n = row.replications as f64;
            let expect = (row.rejection_rate * (1.0 - row.rejection_rate) / n).sqrt();
            assert!((row.std_error - expect).abs() < 1e-12);
            assert_eq!(row.failures, 0, "white-noise cell should not fail");
            assert!(!row.flagged);
            // Loose three-sigma band around the nominal level.
            assert!(row.rejection_rate < 0.15, "{}: {}", row.statistic, row.rejection_rate);
        }
    }

    #[test]
    fn report_is_identical_across_worker_counts() {
        let mut cfg = base_config();
        cfg.statistics = vec![StatisticSpec::Cvm, StatisticSpec::Portmanteau { n: 3 }];
        cfg.replications = 30;
        let cv = CriticalValues::bundled();
        let render = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                render_report(&run_experiment(&cfg, cv).unwrap(), ReportFormat::Csv)
                    .unwrap()
            })
        };
        assert_eq!(render(1), render(4));
    }

    #[test]
    fn zero_drift_local_design_matches_the_base_model() {
        // At tau = 0 the local draw replays the base path bit for bit, so
        // the whole report must match a plain base-model experiment.
        let mut local = base_config();
        local.dgp.kind = DgpKind::Ar1;
        local.dgp.params = vec![vec![0.3]];
        local.dgp.local = Some(LocalSpec { direction: Direction::Fractional, tau: 0.0 });
        local.statistics = vec![StatisticSpec::Ks, StatisticSpec::C0];
        local.replications = 25;

        let mut plain = local.clone();
        plain.dgp.local = None;

        let cv = CriticalValues::bundled();
        let a = render_report(&run_experiment(&local, cv).unwrap(), ReportFormat::Csv);
        let b = render_report(&run_experiment(&plain, cv).unwrap(), ReportFormat::Csv);
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn benchmark_statistic_runs_at_the_generating_parameter() {
        let mut cfg = base_config();
        cfg.dgp.kind = DgpKind::Ar1;
        cfg.dgp.params = vec![vec![0.5]];
        cfg.statistics = vec![StatisticSpec::C0];
        cfg.replications = 60;
        let report = run_experiment(&cfg, CriticalValues::bundled()).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.failures, 0);
        assert!(
            row.rejection_rate < 0.2,
            "benchmark at the true parameter should hold its size, got {}",
            row.rejection_rate
        );
    }

    #[test]
    fn parse_rejects_malformed_text() {
        assert!(parse_report_csv("").is_err());
        assert!(parse_report_csv("not,the,header\n").is_err());
        assert!(parse_report_csv(CSV_HEADER).is_err(), "no rows");
        let bad_row = format!("{CSV_HEADER}\n0.5,200,ks,3\n");
        assert!(parse_report_csv(&bad_row).is_err());
        let bad_num = format!("{CSV_HEADER}\nx,200,ks,3,100,3.00,1.706,0\n");
        assert!(parse_report_csv(&bad_num).is_err());
    }
}
