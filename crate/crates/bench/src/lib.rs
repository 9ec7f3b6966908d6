//! Benchmarks for the watchlist risk detectors live in `benches/`.
