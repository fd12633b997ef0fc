//! Criterion benchmarks for scalevec live under `benches/`.
