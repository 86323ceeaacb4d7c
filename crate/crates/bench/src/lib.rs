//! Criterion benchmarks for the numerical kernels and one training step; see
//! `benches/kernels.rs`.
