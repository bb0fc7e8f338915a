//! Benchmark-only crate; see `benches/safety.rs`.
