//! Benchmark-only crate; see `benches/kernels.rs` for the measurements.
//! Run with `cargo bench -p acc-bench`.
