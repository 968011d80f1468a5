//! Benchmark harness for alodsim; see `benches/`.
