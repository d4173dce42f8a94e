//! Simulated developer.
//!
//! The simulator repeatedly picks a pending question, answers it from an
//! oracle built out of the reference fix, and records how many answers it
//! took and which patches survived. Reports aggregate repeated runs and the
//! per-family ablation curves.
//!
//! Randomness comes from ChaCha8 (`rand_chacha` 0.3). A run is seeded with
//! `ChaCha8Rng::seed_from_u64(seed)` and repeat `i` uses stream `i`, so
//! repeats are independent and reproducible on every platform. Uniform
//! indices are drawn by rejection sampling on `next_u64`.

mod fixture;
mod oracle;
mod report;
mod runner;

pub use fixture::{
    generate_fixture, math41, running_example, running_example_with_values, FixtureError, FixtureSpec, OracleMode, Scenario,
};
pub use oracle::OracleProfile;
pub use report::{classify_remaining, AblationCurve, Bucket, BucketHistogram, CurvePoint, SimulationReport};
pub use runner::{run_experiment, run_simulation, ExperimentConfig, Policy, RunRecord, SimError, Simulator};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// The generator for `(seed, stream)`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform index in `0..n` (`n > 0`).
pub fn below(rng: &mut impl RngCore, n: usize) -> usize {
    assert!(n > 0, "cannot draw from an empty range");
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return (x % n) as usize;
        }
    }
}
