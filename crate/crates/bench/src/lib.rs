//! Criterion benchmarks for the hot paths of `dyadlab`; see `benches/`.
