//! Independent oracles and deterministic synthetic clips for exercising the
//! rate-control stack. Everything here is reachable only from tests and
//! benches; nothing ships in the library.
//!
//! Oracles deliberately avoid the production code paths: the allocator
//! oracle is a plain exhaustive loop, the regression oracle solves the
//! normal equations directly, and the ladder oracle uses the closed form
//! instead of the doubling recurrence.

pub mod clips;
pub mod oracle;

pub use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

/// Seeded generator for reproducible randomized tests.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
