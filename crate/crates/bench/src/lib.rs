//! Criterion benchmarks for the estimator pipeline live in benches/.
