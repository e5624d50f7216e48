//! Simulated reference distributions for the limiting functionals of the
//! test statistics.
//!
//! The omnibus statistics converge to functionals of Brownian motion on
//! [0, 1]: the sup-norm for the Kolmogorov-Smirnov form, the integrated
//! square for the Cramer-von Mises form, and the integrated squared bridge
//! for the simple-hypothesis variant. Quantiles are obtained once by Monte
//! Carlo on a fine grid, stored in a versioned JSON table, and shipped with
//! the crate; they are regenerated with [`brownian_quantiles`] rather than
//! transcribed from printed tables. The sup-norm law also has a classical
//! reflection-series closed form ([`sup_abs_brownian_cdf`]) used to
//! cross-validate the generator.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{GofError, Result};

/// Paths below this would give quantile noise comparable to the tabulated
/// digits, so the generator refuses them.
pub const MIN_PATHS: usize = 100_000;
/// Coarser grids bias the sup functional visibly (the discrete maximum
/// undershoots the continuous one by O(grid^-1/2)).
pub const MIN_GRID: usize = 1_000;

/// Paths simulated per scheduling unit. Each block draws from its own
/// counter-derived stream, so the aggregate is independent of how blocks
/// land on worker threads.
const BLOCK_PATHS: usize = 8_192;

/// Levels tabulated by default; all are exactly representable with four
/// decimals, which the serialized key format requires.
pub const DEFAULT_LEVELS: &[f64] = &[
    0.005, 0.01, 0.025, 0.05, 0.075, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50,
    0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.875, 0.90, 0.91, 0.92, 0.93, 0.94, 0.95,
    0.96, 0.97, 0.975, 0.98, 0.985, 0.99, 0.995, 0.999,
];

/// Limit functional of Brownian motion indexed by a critical-value table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrownianFunctional {
    /// sup over [0,1] of |B(t)|; reference law of the Kolmogorov-Smirnov form.
    SupAbsBrownian,
    /// Integral over [0,1] of B(t)^2; reference law of the Cramer-von Mises form.
    IntSqBrownian,
    /// Integral over [0,1] of (B(t) - t B(1))^2; reference law of the
    /// simple-hypothesis Cramer-von Mises form.
    IntSqBridge,
}

impl BrownianFunctional {
    pub fn name(self) -> &'static str {
        match self {
            BrownianFunctional::SupAbsBrownian => "sup_abs_brownian",
            BrownianFunctional::IntSqBrownian => "int_sq_brownian",
            BrownianFunctional::IntSqBridge => "int_sq_bridge",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sup_abs_brownian" => Ok(BrownianFunctional::SupAbsBrownian),
            "int_sq_brownian" => Ok(BrownianFunctional::IntSqBrownian),
            "int_sq_bridge" => Ok(BrownianFunctional::IntSqBridge),
            other => Err(GofError::Parse(format!(
                "unknown Brownian functional {other:?}; expected one of \
                 sup_abs_brownian, int_sq_brownian, int_sq_bridge"
            ))),
        }
    }

    pub const ALL: [BrownianFunctional; 3] = [
        BrownianFunctional::SupAbsBrownian,
        BrownianFunctional::IntSqBrownian,
        BrownianFunctional::IntSqBridge,
    ];
}

impl std::fmt::Display for BrownianFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Monte Carlo quantile table for one limit functional, together with the
/// generation parameters needed to reproduce it exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalValueTable {
    functional: BrownianFunctional,
    /// (level, quantile) pairs, strictly increasing in both coordinates.
    #[serde(with = "quantile_map")]
    quantiles: Vec<(f64, f64)>,
    paths: u64,
    grid: u64,
    seed: u64,
}

/// Serializes the quantile list as a JSON object keyed by the level printed
/// with four decimals, so the file diffs cleanly and keys sort numerically.
mod quantile_map {
    use super::*;

    pub fn serialize<S: Serializer>(q: &[(f64, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, f64> =
            q.iter().map(|&(level, value)| (format!("{level:.4}"), value)).collect();
        map.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<(f64, f64)>, D::Error> {
        let map = BTreeMap::<String, f64>::deserialize(d)?;
        let mut out = Vec::with_capacity(map.len());
        for (key, value) in map {
            let level: f64 = key
                .parse()
                .map_err(|_| D::Error::custom(format!("bad quantile level key {key:?}")))?;
            out.push((level, value));
        }
        // BTreeMap orders "0.xxxx" keys lexicographically, which coincides
        // with numeric order for fixed-width keys; sort anyway so hand
        // edited files cannot smuggle in a misordered table.
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(out)
    }
}

impl CriticalValueTable {
    pub fn functional(&self) -> BrownianFunctional {
        self.functional
    }

    pub fn paths(&self) -> u64 {
        self.paths
    }

    pub fn grid(&self) -> u64 {
        self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Tabulated (level, value) pairs in increasing level order.
    pub fn levels(&self) -> &[(f64, f64)] {
        &self.quantiles
    }

    /// Rejects tables whose levels or values are not strictly increasing,
    /// or whose levels leave (0, 1).
    pub fn validate(&self) -> Result<()> {
        if self.quantiles.is_empty() {
            return Err(GofError::InvalidConfig("critical value table is empty".into()));
        }
        for window in self.quantiles.windows(2) {
            let (l0, v0) = window[0];
            let (l1, v1) = window[1];
            if l1 <= l0 {
                return Err(GofError::InvalidConfig(format!(
                    "quantile levels not increasing: {l0} then {l1}"
                )));
            }
            if v1 < v0 {
                return Err(GofError::InvalidConfig(format!(
                    "quantiles not monotone: q({l0}) = {v0} exceeds q({l1}) = {v1}"
                )));
            }
        }
        for &(level, value) in &self.quantiles {
            if !(0.0..1.0).contains(&level) || level == 0.0 {
                return Err(GofError::InvalidConfig(format!("level {level} outside (0, 1)")));
            }
            if !value.is_finite() || value < 0.0 {
                return Err(GofError::InvalidConfig(format!("quantile {value} at level {level}")));
            }
        }
        Ok(())
    }

    /// Quantile at `level`, interpolating linearly between tabulated levels.
    /// Levels outside the tabulated range are refused rather than
    /// extrapolated.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        let qs = &self.quantiles;
        let (lo, hi) = (qs[0].0, qs[qs.len() - 1].0);
        if !(lo..=hi).contains(&level) {
            return Err(GofError::Domain(format!(
                "level {level} outside tabulated range [{lo}, {hi}]"
            )));
        }
        let idx = qs.partition_point(|&(l, _)| l < level);
        if idx < qs.len() && qs[idx].0 == level {
            return Ok(qs[idx].1);
        }
        let (l0, v0) = qs[idx - 1];
        let (l1, v1) = qs[idx];
        Ok(v0 + (v1 - v0) * (level - l0) / (l1 - l0))
    }

    /// Distribution function read off the table by inverse interpolation.
    /// Anchored at (0, 0) on the left since every tabulated functional is
    /// nonnegative with a continuous law; clamped at the highest tabulated
    /// level on the right.
    pub fn cdf(&self, x: f64) -> f64 {
        let qs = &self.quantiles;
        if x <= 0.0 {
            return 0.0;
        }
        if x >= qs[qs.len() - 1].1 {
            return qs[qs.len() - 1].0;
        }
        let idx = qs.partition_point(|&(_, v)| v < x);
        let (l1, v1) = qs[idx];
        let (l0, v0) = if idx == 0 { (0.0, 0.0) } else { qs[idx - 1] };
        if v1 == v0 {
            return l1;
        }
        l0 + (l1 - l0) * (x - v0) / (v1 - v0)
    }
}

/// One path's worth of functional values, computed in a single pass over
/// the increments.
struct PathFunctionals {
    sup_abs: f64,
    int_sq: f64,
    int_sq_bridge: f64,
}

fn simulate_path<R: Rng>(rng: &mut R, grid: usize) -> PathFunctionals {
    let step = 1.0 / (grid as f64);
    let scale = step.sqrt();
    let mut s = 0.0_f64;
    let mut max_abs = 0.0_f64;
    let mut sum_sq = 0.0_f64;
    let mut sum_ts = 0.0_f64;
    for i in 1..=grid {
        let z: f64 = rng.sample(StandardNormal);
        s += scale * z;
        max_abs = max_abs.max(s.abs());
        sum_sq += s * s;
        sum_ts += (i as f64) * s;
    }
    // Bridge values b_i = s_i - (i/g) s_g expand to three running sums;
    // sum of i^2 has the closed form g(g+1)(2g+1)/6.
    let g = grid as f64;
    let sum_i_sq = g * (g + 1.0) * (2.0 * g + 1.0) / 6.0;
    let bridge_sq = sum_sq - 2.0 * (s / g) * sum_ts + (s / g) * (s / g) * sum_i_sq;
    PathFunctionals {
        sup_abs: max_abs,
        int_sq: sum_sq * step,
        int_sq_bridge: bridge_sq * step,
    }
}

/// Stream key for one block: the master seed and block index are embedded
/// directly in the cipher key, so streams never collide and the schedule
/// cannot matter.
fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&block.to_le_bytes());
    key[16..24].copy_from_slice(b"brownian");
    ChaCha8Rng::from_seed(key)
}

/// Simulates all three functionals over the same paths. Sharing draws keeps
/// a single-functional regeneration bit-identical to the bundled tables.
fn simulate_functionals(paths: usize, grid: usize, seed: u64) -> [Vec<f64>; 3] {
    let n_blocks = paths.div_ceil(BLOCK_PATHS);
    let blocks: Vec<[Vec<f64>; 3]> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b as u64);
            let count = BLOCK_PATHS.min(paths - b * BLOCK_PATHS);
            let mut sup = Vec::with_capacity(count);
            let mut int_sq = Vec::with_capacity(count);
            let mut bridge = Vec::with_capacity(count);
            for _ in 0..count {
                let f = simulate_path(&mut rng, grid);
                sup.push(f.sup_abs);
                int_sq.push(f.int_sq);
                bridge.push(f.int_sq_bridge);
            }
            [sup, int_sq, bridge]
        })
        .collect();

    let mut out = [
        Vec::with_capacity(paths),
        Vec::with_capacity(paths),
        Vec::with_capacity(paths),
    ];
    for block in blocks {
        for (dst, src) in out.iter_mut().zip(block) {
            dst.extend(src);
        }
    }
    out
}

fn order_statistic(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let h = level * (n - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Simulates the requested functional's quantiles at `levels`.
///
/// Paths run in fixed-size blocks with counter-derived ChaCha streams, so
/// the table depends only on (seed, paths, grid), not on the number of
/// worker threads.
pub fn brownian_quantiles(
    functional: BrownianFunctional,
    levels: &[f64],
    paths: usize,
    grid: usize,
    seed: u64,
) -> Result<CriticalValueTable> {
    if paths < MIN_PATHS {
        return Err(GofError::InvalidParameter(format!(
            "paths = {paths}; at least {MIN_PATHS} required for a stable table"
        )));
    }
    if grid < MIN_GRID {
        return Err(GofError::InvalidParameter(format!(
            "grid = {grid}; at least {MIN_GRID} required to resolve the sup functional"
        )));
    }
    if levels.is_empty() {
        return Err(GofError::InvalidParameter("no quantile levels requested".into()));
    }
    for window in levels.windows(2) {
        if window[1] <= window[0] {
            return Err(GofError::InvalidParameter(format!(
                "levels must be strictly increasing; got {} then {}",
                window[0], window[1]
            )));
        }
    }
    if levels[0] <= 0.0 || levels[levels.len() - 1] >= 1.0 {
        return Err(GofError::InvalidParameter("levels must lie strictly inside (0, 1)".into()));
    }

    let samples = simulate_functionals(paths, grid, seed);
    let mut values = match functional {
        BrownianFunctional::SupAbsBrownian => samples[0].clone(),
        BrownianFunctional::IntSqBrownian => samples[1].clone(),
        BrownianFunctional::IntSqBridge => samples[2].clone(),
    };
    values.sort_by(f64::total_cmp);
    let quantiles = levels.iter().map(|&l| (l, order_statistic(&values, l))).collect();

    let table = CriticalValueTable {
        functional,
        quantiles,
        paths: paths as u64,
        grid: grid as u64,
        seed,
    };
    table.validate()?;
    Ok(table)
}

/// P(sup over [0,1] of |B(t)| <= a) by the reflection principle:
/// the alternating series over images sum_k (-1)^k (Phi((2k+1)a) - Phi((2k-1)a)).
pub fn sup_abs_brownian_cdf(a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    // Below this the probability underflows long before the series settles.
    if a < 0.05 {
        return 0.0;
    }
    let phi = crate::special::normal_cdf;
    // The k and -k images contribute equally, so fold the two-sided sum.
    let mut p = 2.0 * phi(a) - 1.0;
    let mut sign = -1.0;
    for k in 1..10_000 {
        let kf = k as f64;
        let term = phi((2.0 * kf + 1.0) * a) - phi((2.0 * kf - 1.0) * a);
        p += 2.0 * sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    p.clamp(0.0, 1.0)
}

/// The three tables used by the test statistics, loaded as one bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalValues {
    sup_abs_brownian: CriticalValueTable,
    int_sq_brownian: CriticalValueTable,
    int_sq_bridge: CriticalValueTable,
}

static BUNDLED: OnceLock<CriticalValues> = OnceLock::new();

impl CriticalValues {
    pub fn table(&self, functional: BrownianFunctional) -> &CriticalValueTable {
        match functional {
            BrownianFunctional::SupAbsBrownian => &self.sup_abs_brownian,
            BrownianFunctional::IntSqBrownian => &self.int_sq_brownian,
            BrownianFunctional::IntSqBridge => &self.int_sq_bridge,
        }
    }

    pub fn from_tables(tables: [CriticalValueTable; 3]) -> Result<Self> {
        let mut slots: [Option<CriticalValueTable>; 3] = [None, None, None];
        for t in tables {
            t.validate()?;
            let idx = BrownianFunctional::ALL.iter().position(|&f| f == t.functional()).unwrap();
            if slots[idx].is_some() {
                return Err(GofError::InvalidConfig(format!(
                    "duplicate table for {}",
                    t.functional()
                )));
            }
            slots[idx] = Some(t);
        }
        let [a, b, c] = slots;
        Ok(CriticalValues {
            sup_abs_brownian: a.unwrap(),
            int_sq_brownian: b.unwrap(),
            int_sq_bridge: c.unwrap(),
        })
    }

    /// Generates a fresh bundle; all three tables share the same path draws,
    /// which is what makes per-functional regeneration reproducible.
    pub fn generate(levels: &[f64], paths: usize, grid: usize, seed: u64) -> Result<Self> {
        let tables: Result<Vec<_>> = BrownianFunctional::ALL
            .iter()
            .map(|&f| brownian_quantiles(f, levels, paths, grid, seed))
            .collect();
        let mut tables = tables?;
        let c = tables.pop().unwrap();
        let b = tables.pop().unwrap();
        let a = tables.pop().unwrap();
        Self::from_tables([a, b, c])
    }

    pub fn validate(&self) -> Result<()> {
        for &f in &BrownianFunctional::ALL {
            let t = self.table(f);
            t.validate()?;
            if t.functional() != f {
                return Err(GofError::InvalidConfig(format!(
                    "bundle slot {f} holds a table for {}",
                    t.functional()
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cv: CriticalValues =
            serde_json::from_str(text).map_err(|e| GofError::Parse(format!("critical value table: {e}")))?;
        cv.validate()?;
        Ok(cv)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        // Serialization of a validated bundle cannot fail.
        serde_json::to_string_pretty(self).expect("serializing critical values")
    }

    /// Tables shipped with the crate, parsed once on first use.
    pub fn bundled() -> &'static CriticalValues {
        BUNDLED.get_or_init(|| {
            Self::from_json(include_str!("../data/critvals_default.json"))
                .expect("bundled critical value table is valid")
        })
    }
}
