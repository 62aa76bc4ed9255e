//! Benchmarks for `maass-core`; see `benches/solver.rs`.
