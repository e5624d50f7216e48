//! Regenerates the bundled critical-value tables.
//!
//! ```text
//! cargo run --release -p specgof --example gen_tables [paths grid seed] > crates/core/data/critvals_default.json
//! ```
//!
//! The shipped file was produced with the defaults below. Changing any of
//! the three parameters changes every quantile, so bump them deliberately
//! and rerun the acceptance suite afterwards.

use specgof::critvals::{CriticalValues, DEFAULT_LEVELS};

fn main() {
    let mut args = std::env::args().skip(1);
    let paths: usize = args.next().map(|s| s.parse().expect("paths")).unwrap_or(1_000_000);
    let grid: usize = args.next().map(|s| s.parse().expect("grid")).unwrap_or(16_384);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(2_005_113_371);

    let cv = CriticalValues::generate(DEFAULT_LEVELS, paths, grid, seed).expect("generation");
    println!("{}", cv.to_json());
}
