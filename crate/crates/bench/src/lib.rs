//! Criterion benchmarks for `stablekern`; see `benches/`.
