//! Benchmark-only crate; see `benches/rate_control.rs`.
