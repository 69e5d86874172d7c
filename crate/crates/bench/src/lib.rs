//! Benchmarks for forward passes and the reservoir recurrence live in `benches/`.
