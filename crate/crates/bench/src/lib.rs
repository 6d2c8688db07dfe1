//! Criterion benchmarks of the walking model; see `benches/`.
